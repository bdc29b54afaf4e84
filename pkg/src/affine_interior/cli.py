"""Command-line front end.

Exit status: 0 certified / passed, 2 inconclusive or not certified,
1 error, 64 usage error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import attractor, dimension, fourier, measures, splitting
from .config import ConfigError, SystemConfig, parse_config
from .linalg import DomainError, MapTuple
from .reports import SCHEMA_VERSION, atomic_write, dumps, fmt_float, points_csv

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64

COMMANDS = ("check", "tvalue", "affdim", "measure", "render", "interior", "split",
            "sobolev", "verify")
SUITES = ("gradient", "prop_t", "prop_tds", "reduce", "phase", "fourier", "all")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N[,N...], got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("resolutions must be positive")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X[,X...], got {text!r}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> Parser:
    p = Parser(prog="affine-interior", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="system config (JSON)")
    p.add_argument("--seed", type=_u64, help="overrides the config seed")
    p.add_argument("--depth", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--resolution", type=_int_list)
    p.add_argument("--t", type=float, dest="t_val")
    p.add_argument("--t-max", type=float, default=2.5, help="upper end of the split t search")
    p.add_argument("--out", default=None, help="output directory (default: stdout only)")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--format", choices=("json", "csv", "pgm"), default="json")
    p.add_argument("--trials", type=int)
    p.add_argument("--s", type=_float_list, dest="s_values")
    return p


# ----------------------------------------------------------------- commands

def _need_config(args, cfg):
    if cfg is None:
        raise UsageError(f"{args.command} needs --config")
    return cfg


def cmd_check(args, cfg, seed):
    tup = _need_config(args, cfg).tuple()
    depth = args.depth or 8
    tv = dimension.check_tvalue_gate(tup, max_depth=depth, budget=args.budget or 10**8)
    cf = dimension.check_conformal_gate(tup)
    cm = dimension.check_commuting_gate(tup)
    ok = bool(tv["certified"] or cf["certified"] or cm["certified"])
    return {"tvalue_gate": tv, "conformal_gate": cf, "commuting_gate": cm,
            "any_certified": ok}, EXIT_OK if ok else EXIT_INCONCLUSIVE, {}


def cmd_tvalue(args, cfg, seed):
    tup = _need_config(args, cfg).tuple()
    cert = dimension.certify_t_above_d(tup, max_depth=args.depth or 6,
                                       budget=args.budget or 10**8)
    res = {"status": cert.status, "certified": cert.certified,
           "witness_depth": cert.witness_depth, "witness_sum": cert.witness_sum,
           "lower_bound": cert.lower_bound, "diagnostics": cert.diagnostics,
           "provenance": {"witness_sum": "exact level sum of alpha_d^d |det| over words",
                          "lower_bound": "bisection zero of the level pressure"}}
    return res, EXIT_OK if cert.certified else EXIT_INCONCLUSIVE, {}


def cmd_affdim(args, cfg, seed):
    tup = _need_config(args, cfg).tuple()
    br = dimension.affinity_bracket(tup, depth=args.depth or 8, budget=args.budget or 1 << 22)
    return {"lower": br.lower, "upper": br.upper, "width": br.width, "depth": br.depth,
            "diagnostics": br.diagnostics}, EXIT_OK, {}


def cmd_measure(args, cfg, seed):
    tup = _need_config(args, cfg).tuple()
    t_val = args.t_val
    prov = "--t"
    if t_val is None:
        cert = dimension.certify_t_above_d(tup, max_depth=6)
        if not cert.certified:
            return {"status": "no t > d available", "tvalue": cert.status}, EXIT_INCONCLUSIVE, {}
        t_val = dimension.default_t(cert, tup.d)
        prov = "d + 0.9 * (lower bound from tvalue - d)"
    try:
        mu, c = measures.build_block_measure(tup, t_val)
    except DomainError as exc:
        return {"status": "no block measure", "reason": str(exc), "t": t_val}, EXIT_INCONCLUSIVE, {}
    rep = measures.verify_cylinder_bound(mu, c, tup, args.depth if args.depth is not None else 6)
    res = {"t": t_val, "N": c.N, "lambda": c.lam, "gamma": c.gamma, "C": c.C, "r": c.r,
           "verification": rep,
           "provenance": {"t": prov, "lambda": "level-N sum of g_t", "gamma":
                          "max over |J| <= N of 1/g_t(J)", "C": "gamma * lambda",
                          "r": "lambda^(-1/N)"}}
    return res, EXIT_OK if rep["holds"] else EXIT_INCONCLUSIVE, {}


def _grid_artifacts(name, grid, fmt):
    if fmt == "pgm":
        return {f"{name}.pgm": grid.to_pgm_bytes()}
    if fmt == "csv":
        return {f"{name}.csv": grid.to_csv_text()}
    return {}


def cmd_render(args, cfg, seed):
    ifs = _need_config(args, cfg).ifs()
    res_list = args.resolution or [512]
    depth = args.depth if args.depth is not None else 4
    files, rows = {}, []
    for r in res_list:
        g = attractor.render_cylinder_cover(ifs, depth, r, budget=args.budget or 1 << 22)
        rows.append({"resolution": r, "marked_cells": int(g.occupied.sum()),
                     "occupied_fraction": g.occupied_fraction(), **g.meta})
        if ifs.d <= 2:
            files.update(_grid_artifacts(f"cover_{r}", g, args.format))
    partial = any(r["partial"] for r in rows)
    return {"provenance": attractor.CYLINDER_COVERED, "grids": rows,
            "lo": g.lo, "hi": g.hi}, EXIT_INCONCLUSIVE if partial else EXIT_OK, files


def cmd_interior(args, cfg, seed):
    ifs = _need_config(args, cfg).ifs()
    res_list = sorted(args.resolution or [512, 1024])
    if len(res_list) < 2:
        raise UsageError("interior needs at least two resolutions")
    n = args.budget or 16 * max(res_list) ** ifs.d
    grids = attractor.sample_grids(ifs, res_list, n, rng=seed)
    rep = attractor.detect_interior(ifs, res_list, grids=grids)
    vol = attractor.measure_lower_evidence(ifs, res_list, grids=grids)
    files = {}
    if ifs.d <= 2:
        for g in grids:
            files.update(_grid_artifacts(f"samples_{g.resolution}", g, args.format))
    return {"samples": n, "interior": rep, "volume": vol}, \
        EXIT_OK if rep["stable"] else EXIT_INCONCLUSIVE, files


def cmd_split(args, cfg, seed):
    cfg = _need_config(args, cfg)
    tup, ifs = cfg.tuple(), cfg.ifs()
    try:
        block = splitting.find_certified_block(tup, t_range=(2.0, args.t_max),
                                               max_N=args.depth or 4)
    except splitting.SplitSearchError as exc:
        return {"status": "no certified block", "best_score": exc.best_score,
                "reason": str(exc)}, EXIT_INCONCLUSIVE, {}
    except DomainError as exc:
        return {"status": "hypotheses fail", "reason": str(exc)}, EXIT_INCONCLUSIVE, {}
    cert = splitting.build_split(ifs, block)
    rep = splitting.verify_split(ifs, cert, n_samples=args.trials or 10_000, rng=seed)
    return {"certificate": cert.to_dict(), "verification": rep,
            "provenance": {"t": "largest grid value in (2, t_max] with a class score > 1",
                           "J": "lexicographically smallest word of the class"}}, \
        EXIT_OK if rep["passed"] else EXIT_INCONCLUSIVE, {}


def cmd_sobolev(args, cfg, seed):
    ifs = _need_config(args, cfg).ifs()
    s_values = args.s_values or [0.5, 1.0, 1.5, 2.0]
    n = args.budget or 20_000
    cloud = attractor.chaos_sample(ifs, n, eps=1e-7, rng=np.random.SeedSequence(seed).spawn(1)[0])
    est = fourier.sobolev_estimate(cloud, s_values, rng=seed, n_freq=args.trials or 256)
    files = {}
    if args.format == "csv":
        files["sobolev.csv"] = "s,parameter,value,stderr\n" + "".join(
            f"{fmt_float(c['s'])},{fmt_float(R)},{fmt_float(v)},{fmt_float(e)}\n"
            for c in est["curves"] for R, v, e in zip(c["R"], c["value"], c["stderr"]))
        files["cloud.csv"] = points_csv(cloud)
    return {"n_points": n, **est}, EXIT_OK if est["estimate"] != "no stable s found" \
        else EXIT_INCONCLUSIVE, files


def _suite_gradient(args, cfg, seed):
    trials = args.trials or 10_000
    out = {}
    ss = np.random.SeedSequence(seed).spawn(3)
    for dl, s in zip((0.30, 0.45, 0.49), ss):
        out[f"delta={dl}"] = fourier.verify_gradient_bound(trials, delta=dl, rng=s)
    return out, all(r["passed"] for r in out.values())


def _suite_prop(kind):
    def run(args, cfg, seed):
        t, N = (2.5, 6.0) if kind == "t" else (1.5, 4.0)
        sw = fourier.anisotropy_sweep(kind, t, N)
        return sw, sw["spread"] <= 50
    return run


def _suite_reduce(args, cfg, seed):
    base = fourier.verify_reduce_integral([1.0], 2.0)
    x = np.array([1.0, 0.3])
    ref = fourier.verify_reduce_integral(x, 2.5)["ratio"]
    scale = [{"lambda": lam, "ratio": fourier.verify_reduce_integral(lam * x, 2.5)["ratio"]}
             for lam in (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)]
    dev = max(abs(r["ratio"] / ref - 1) for r in scale)
    ok = abs(base["integral"] / np.pi - 1) <= 1e-3 and dev <= 1e-6
    return {"pi_case": base, "scaling": scale, "max_relative_deviation": dev}, ok


def _suite_phase(args, cfg, seed):
    tup = MapTuple(np.array([0.4, 0.35]))
    psi = fourier.BumpFunction(np.array([0.5, -0.3]), 0.5)
    xs = np.logspace(0, 3, 13)
    out = {}
    for pre in (0, 2):
        x = [0] * pre + [0] + [1] * 20
        y = [0] * pre + [1] + [0] * 20
        out[f"prefix={pre}"] = fourier.verify_stationary_phase_small(tup, psi, x, y, xs)
    return out, all(r["bounded"] for r in out.values())


def _suite_fourier(args, cfg, seed):
    from .systems import unit_square
    ifs = unit_square().ifs()
    cloud = attractor.chaos_sample(ifs, 100_000, eps=1e-7, rng=seed)
    v0, _ = fourier.fourier_mc(cloud, [0.0, 0.0])
    v, e = fourier.fourier_mc(cloud, [2 * np.pi, 2 * np.pi])
    ok = v0 == 1 and abs(v) <= 4 * e
    return {"mu_hat_0": v0, "mu_hat_2pi": v, "stderr": e}, ok


SUITE_FUNCS = {"gradient": _suite_gradient, "prop_t": _suite_prop("t"),
               "prop_tds": _suite_prop("tds"), "reduce": _suite_reduce,
               "phase": _suite_phase, "fourier": _suite_fourier}


def cmd_verify(args, cfg, seed):
    names = list(SUITE_FUNCS) if args.suite == "all" else [args.suite]
    res, ok = {}, True
    for name in names:
        r, passed = SUITE_FUNCS[name](args, cfg, seed)
        res[name] = {"passed": bool(passed), "result": r}
        ok &= bool(passed)
    return res, EXIT_OK if ok else EXIT_INCONCLUSIVE, {}


HANDLERS = {"check": cmd_check, "tvalue": cmd_tvalue, "affdim": cmd_affdim,
            "measure": cmd_measure, "render": cmd_render, "interior": cmd_interior,
            "split": cmd_split, "sobolev": cmd_sobolev, "verify": cmd_verify}


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg: SystemConfig | None = parse_config(args.config) if args.config else None
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        result, status, files = HANDLERS[args.command](args, cfg, seed)
    except UsageError as exc:
        sys.stderr.write(f"affine-interior: error: {exc}\n")
        return EXIT_USAGE
    except (ConfigError, DomainError, ArithmeticError) as exc:
        sys.stderr.write(f"affine-interior: error: {exc}\n")
        return EXIT_ERROR
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    flags["seed"] = seed
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config_hash": cfg.hash() if cfg else None,
        "config": cfg.to_dict() if cfg else None,
        "config_gates": cfg.gates if cfg else None,
        "flags": flags,
        "exit_status": status,
        "result": result,
    }
    text = dumps(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        atomic_write(os.path.join(args.out, f"{args.command}.json"), text)
        for name, data in files.items():
            atomic_write(os.path.join(args.out, name), data)
    stdout.write(text)
    return status


def main(argv=None) -> None:
    raise SystemExit(run(argv))


__all__ = ["main", "run", "build_parser"]
