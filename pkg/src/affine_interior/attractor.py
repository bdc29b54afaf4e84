"""Coding map, chaos-game sampling and raster evidence for the attractor."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .linalg import DomainError, MapTuple, batch_singular_values, walk_words
from .measures import BlockBernoulli, sample_words

POINT_SAMPLED = "PointSampled"
CYLINDER_COVERED = "CylinderCovered"
SAMPLE_BLOCK = 1 << 16


def worker_count() -> int:
    env = os.environ.get("AFFINE_INTERIOR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class IfsInstance:
    """Affine maps ``x -> T_i x + a_i``.

    ``bounding_radius`` is ``max|a_i| / (1 - delta)``: the ball of that
    radius about the origin is mapped into itself and contains ``K``.
    """

    tup: MapTuple
    translations: np.ndarray
    bounding_radius: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.translations, dtype=float).reshape(self.tup.m, -1)
        if a.shape != (self.tup.m, self.tup.d):
            raise DomainError(
                f"translations must have shape {(self.tup.m, self.tup.d)}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("translations contain non-finite entries")
        if self.tup.delta >= 1:
            raise DomainError("maps must be contractions")
        a.setflags(write=False)
        object.__setattr__(self, "translations", a)
        R0 = float(np.max(np.linalg.norm(a, axis=1))) / (1 - self.tup.delta)
        object.__setattr__(self, "bounding_radius", R0)

    @property
    def m(self) -> int:
        return self.tup.m

    @property
    def d(self) -> int:
        return self.tup.d

    @property
    def max_translation(self) -> float:
        return float(np.max(np.linalg.norm(self.translations, axis=1)))

    def fixed_points(self) -> np.ndarray:
        eye = np.eye(self.d)
        return np.array([np.linalg.solve(eye - T, a)
                         for T, a in zip(self.tup.maps, self.translations)])

    def invariant_ball(self) -> tuple[np.ndarray, float]:
        """A smaller forward-invariant ball centred at the mean fixed point.

        ``|f_i(c) - c| + delta R <= R`` for every map, hence
        ``f_i(B(c, R)) ⊂ B(c, R)``.
        """
        c = self.fixed_points().mean(axis=0)
        moved = np.linalg.norm(
            np.einsum("kij,j->ki", self.tup.maps, c) + self.translations - c, axis=1)
        R = float(np.max(moved)) / (1 - self.tup.delta)
        return c, R


def truncation_depth(ifs: IfsInstance, eps: float) -> int:
    """Smallest ``n`` with ``delta**n * max|a_i| / (1 - delta) <= eps``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    amax = ifs.max_translation
    if amax == 0:
        return 0
    delta = ifs.tup.delta
    n = math.log(eps * (1 - delta) / amax) / math.log(delta)
    return max(0, math.ceil(n))


def truncation_error(ifs: IfsInstance, n: int) -> float:
    return ifs.tup.delta**n * ifs.max_translation / (1 - ifs.tup.delta)


def code_points(ifs: IfsInstance, words: np.ndarray) -> np.ndarray:
    """``f_{w_1} o ... o f_{w_n}(0)`` for each row, by Horner's rule."""
    words = np.asarray(words, dtype=np.int64)
    if words.ndim == 1:
        words = words[None]
    K, n = words.shape
    T, a = ifs.tup.maps, ifs.translations
    x = np.zeros((K, ifs.d))
    for k in range(n - 1, -1, -1):
        idx = words[:, k]
        x = np.einsum("kij,kj->ki", T[idx], x) + a[idx]
    return x


def code_point(ifs: IfsInstance, x, eps: float | None = None) -> np.ndarray:
    """Approximate ``pi^a(x)``.

    With ``eps`` the word is truncated at the depth guaranteeing error
    ``<= eps`` and must be at least that long; without it the whole
    finite word is used (i.e. the point ``f_x(0)``).
    """
    x = tuple(int(i) for i in x)
    if any(not 0 <= i < ifs.m for i in x):
        raise DomainError("letter out of range")
    if eps is not None:
        n = truncation_depth(ifs, eps)
        if len(x) < n:
            raise DomainError(f"word of length {len(x)} too short for eps={eps} (need {n})")
        x = x[:n]
    return code_points(ifs, np.array([x], dtype=np.int64).reshape(1, len(x)))[0]


def seed_sequence(rng) -> np.random.SeedSequence:
    """Accepts an int seed, a ``SeedSequence`` or a ``Generator``."""
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    return np.random.SeedSequence(rng)


def iter_chaos_blocks(ifs: IfsInstance, n_points: int, mu: BlockBernoulli | None = None,
                      eps: float = 1e-6, rng=0, block: int = SAMPLE_BLOCK,
                      return_words: bool = False):
    """Yield i.i.d. pushforward samples in blocks.

    Each block has its own spawned seed, so the output is identical for
    any worker count.
    """
    if n_points < 1:
        raise DomainError("n_points must be >= 1")
    if mu is None:
        mu = BlockBernoulli.uniform_letters(ifs.m)
    if mu.m != ifs.m:
        raise DomainError("measure alphabet does not match the IFS")
    n = truncation_depth(ifs, eps)
    sizes = [min(block, n_points - lo) for lo in range(0, n_points, block)]
    seeds = seed_sequence(rng).spawn(len(sizes))

    def work(args):
        size, ss = args
        g = np.random.default_rng(ss)
        w = sample_words(mu, n, size, g) if n else np.zeros((size, 0), dtype=np.int64)
        pts = code_points(ifs, w)
        return (pts, w) if return_words else pts

    workers = worker_count()
    jobs = list(zip(sizes, seeds))
    if workers == 1:
        for j in jobs:
            yield work(j)
        return
    with ThreadPoolExecutor(workers) as ex:
        # bounded window keeps memory flat while preserving block order
        for lo in range(0, len(jobs), 4 * workers):
            yield from ex.map(work, jobs[lo:lo + 4 * workers])


def chaos_sample(ifs: IfsInstance, n_points: int, mu: BlockBernoulli | None = None,
                 eps: float = 1e-6, rng=0, return_words: bool = False):
    """Samples of ``mu o (pi^a)^{-1}``, each within ``eps`` of its coded point."""
    blocks = list(iter_chaos_blocks(ifs, n_points, mu, eps, rng, return_words=return_words))
    if return_words:
        return (np.concatenate([b[0] for b in blocks]),
                np.concatenate([b[1] for b in blocks]))
    return np.concatenate(blocks)


@dataclass
class OccupancyGrid:
    """Hit counters on a cubic box split into ``resolution`` cells per axis."""

    lo: np.ndarray
    hi: np.ndarray
    resolution: int
    counts: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, lo, hi, resolution: int, provenance: str, **meta) -> "OccupancyGrid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        counts = np.zeros((resolution,) * lo.size, dtype=np.int64)
        return cls(lo, hi, resolution, counts, provenance, dict(meta))

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def cell(self) -> np.ndarray:
        return (self.hi - self.lo) / self.resolution

    def cell_index(self, points: np.ndarray):
        pts = np.atleast_2d(points)
        rel = (pts - self.lo) / (self.hi - self.lo)
        inside = np.all((rel >= 0) & (rel <= 1), axis=1)
        idx = np.minimum((rel * self.resolution).astype(np.int64), self.resolution - 1)
        return idx, inside

    def add_points(self, points: np.ndarray) -> None:
        idx, inside = self.cell_index(points)
        idx = idx[inside]
        flat = np.ravel_multi_index(idx.T, self.counts.shape)
        self.counts += np.bincount(flat, minlength=self.counts.size).reshape(self.counts.shape)
        self.meta["samples"] = self.meta.get("samples", 0) + int(inside.sum())
        self.meta["dropped"] = self.meta.get("dropped", 0) + int((~inside).sum())

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    def occupied_fraction(self) -> float:
        return float(self.occupied.mean())

    def occupied_volume(self) -> float:
        return float(self.occupied.sum() * np.prod(self.cell))

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        idx, inside = self.cell_index(points)
        ok = np.zeros(len(idx), dtype=bool)
        ok[inside] = self.occupied[tuple(idx[inside].T)]
        return ok

    def raster(self) -> np.ndarray:
        """2-D image, top row = largest second coordinate, values capped at 255."""
        if self.d != 2:
            raise DomainError("raster export needs d == 2")
        img = np.minimum(self.counts, 255).astype(np.uint8).T[::-1]
        return np.ascontiguousarray(img)

    def to_pgm_bytes(self) -> bytes:
        img = self.raster()
        h, w = img.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()

    def to_csv_text(self) -> str:
        if self.d == 2:
            rows = self.counts.T[::-1]
        elif self.d == 1:
            rows = self.counts[None]
        else:
            raise DomainError("CSV grid export supports d <= 2")
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in rows)


def default_bounds(ifs: IfsInstance):
    c, R = ifs.invariant_ball()
    if R == 0:
        R = 1e-9
    return c - R, c + R


def _mark_balls(grid: OccupancyGrid, centers: np.ndarray, radii: np.ndarray,
                max_cells: int = 1 << 22) -> None:
    """Increment every cell meeting one of the closed balls."""
    h = grid.cell
    res = grid.resolution
    lo_idx = np.floor((centers - radii[:, None] - grid.lo) / h).astype(np.int64)
    hi_idx = np.floor((centers + radii[:, None] - grid.lo) / h).astype(np.int64)
    lo_idx = np.clip(lo_idx, 0, res - 1)
    hi_idx = np.clip(hi_idx, 0, res - 1)
    span = np.max(hi_idx - lo_idx + 1, axis=1)
    d = grid.d
    flat_hits = []
    for S in np.unique(span):
        sel = np.flatnonzero(span == S)
        offs = np.indices((int(S),) * d).reshape(d, -1).T
        step = max(1, max_cells // len(offs))
        for a in range(0, len(sel), step):
            part = sel[a:a + step]
            cand = lo_idx[part, None, :] + offs[None]
            ok = np.all(cand <= hi_idx[part, None, :], axis=2)
            cell_lo = grid.lo + cand * h
            near = np.clip(centers[part, None, :], cell_lo, cell_lo + h)
            dist2 = np.sum((near - centers[part, None, :]) ** 2, axis=2)
            ok &= dist2 <= radii[part, None] ** 2 * (1 + 1e-12)
            flat_hits.append(np.ravel_multi_index(cand[ok].T, grid.counts.shape))
    if flat_hits:
        flat = np.concatenate(flat_hits)
        grid.counts += np.bincount(flat, minlength=grid.counts.size).reshape(grid.counts.shape)


def render_cylinder_cover(ifs: IfsInstance, depth: int, resolution: int,
                          bounds=None, budget: int = 1 << 22,
                          ball: str = "tight") -> OccupancyGrid:
    """Outer cover of ``K`` by the balls ``f_I(B(c, R))``, ``|I| = depth``.

    Each image is enclosed in the ball of radius ``alpha_1(T_I) R`` about
    ``f_I(c)``.  ``ball="tight"`` uses the invariant ball about the mean
    fixed point, ``ball="origin"`` uses ``B(0, bounding_radius)``.  Balls
    missing the box are culled.  If ``m**depth`` exceeds ``budget`` the
    deepest affordable level is used and the grid is flagged partial.
    """
    if depth < 0:
        raise DomainError("depth must be >= 0")
    if ball == "tight":
        c, R = ifs.invariant_ball()
    elif ball == "origin":
        c, R = np.zeros(ifs.d), ifs.bounding_radius
    else:
        raise DomainError(f"unknown ball {ball!r}")
    lo, hi = default_bounds(ifs) if bounds is None else map(np.asarray, bounds)
    used = depth
    while used > 0 and ifs.m**used > budget:
        used -= 1
    grid = OccupancyGrid.empty(lo, hi, resolution, CYLINDER_COVERED, depth=used,
                               requested_depth=depth, partial=used < depth, ball=ball)
    a = ifs.translations

    def extend(parent, idx, letters):
        P = parent.prods[idx]
        return {"offset": parent.state["offset"][idx] + np.einsum("kij,kj->ki", P, a[letters])}

    def prune(b):
        cen = np.einsum("kij,j->ki", b.prods, c) + b.state["offset"]
        rad = batch_singular_values(b.prods)[:, 0] * R
        near = np.clip(cen, grid.lo, grid.hi)
        return np.sum((near - cen) ** 2, axis=1) <= rad**2

    def visit(b):
        if b.level == used:
            cen = np.einsum("kij,j->ki", b.prods, c) + b.state["offset"]
            rad = batch_singular_values(b.prods)[:, 0] * R
            _mark_balls(grid, cen, rad)
            grid.meta["balls"] = grid.meta.get("balls", 0) + len(b)

    walk_words(ifs.tup, used, visit, extend=extend, prune=prune,
               state0={"offset": np.zeros(ifs.d)})
    return grid


def sample_grids(ifs: IfsInstance, resolutions, n_samples: int,
                 mu: BlockBernoulli | None = None, eps: float | None = None,
                 rng=0, bounds=None) -> list[OccupancyGrid]:
    """Point-sampled grids at several resolutions from one sample stream."""
    lo, hi = default_bounds(ifs) if bounds is None else map(np.asarray, bounds)
    finest = max(resolutions)
    if eps is None:
        eps = 0.5 * float(np.linalg.norm((hi - lo) / finest))
    grids = [OccupancyGrid.empty(lo, hi, r, POINT_SAMPLED, eps=eps) for r in resolutions]
    for pts in iter_chaos_blocks(ifs, n_samples, mu, eps, rng):
        for g in grids:
            g.add_points(pts)
    return grids


def largest_hit_disk(grid: OccupancyGrid):
    """Centre cell and radius (in cells) of the largest ball of hit cells.

    Every cell centre within the returned radius of the centre belongs
    to a hit cell; cells outside the box count as empty.
    """
    mask = np.pad(grid.occupied, 1, constant_values=False)
    if not mask.any():
        return None, 0.0
    dist = ndimage.distance_transform_edt(mask)
    flat = int(np.argmax(dist))
    centre = np.array(np.unravel_index(flat, dist.shape)) - 1
    return centre, max(float(dist.flat[flat]) - 1.0, 0.0)


def _default_samples(resolutions, d: int, per_cell: int = 16) -> int:
    return per_cell * max(resolutions) ** d


def detect_interior(ifs: IfsInstance, resolutions, n_samples: int | None = None,
                    rng=0, mu: BlockBernoulli | None = None, min_cells: float = 2.0,
                    ratio_threshold: float = 0.8, grids=None) -> dict:
    """Raster evidence (never a proof) that ``K`` has interior points.

    Per resolution the largest disk of hit cells is found; the verdict is
    "stable" when its physical radius stays positive (at least
    ``min_cells`` cells at the finest grid) and shrinks by no more than
    ``ratio_threshold`` between successive refinements.
    """
    resolutions = list(resolutions)
    if len(resolutions) < 2 or sorted(resolutions) != resolutions:
        raise DomainError("need at least two resolutions, coarsest first")
    if grids is None:
        n = n_samples or _default_samples(resolutions, ifs.d)
        grids = sample_grids(ifs, resolutions, n, mu, rng=rng)
    rows = []
    for g in grids:
        centre, rc = largest_hit_disk(g)
        h = float(g.cell[0])
        rows.append({
            "resolution": g.resolution,
            "radius_cells": rc,
            "radius": rc * h,
            "centre": None if centre is None else (g.lo + (centre + 0.5) * g.cell).tolist(),
            "occupied_fraction": g.occupied_fraction(),
        })
    ratios = [rows[i + 1]["radius"] / rows[i]["radius"] if rows[i]["radius"] > 0 else 0.0
              for i in range(len(rows) - 1)]
    stable = (rows[-1]["radius_cells"] >= min_cells
              and all(r >= ratio_threshold for r in ratios))
    return {
        "certifying": False,
        "note": "empirical raster evidence; not a certificate of interior",
        "per_resolution": rows,
        "radius_ratios": ratios,
        "verdict": "stable interior evidence" if stable else "no interior evidence",
        "stable": stable,
    }


def measure_lower_evidence(ifs: IfsInstance, resolutions, n_samples: int | None = None,
                           rng=0, mu: BlockBernoulli | None = None, grids=None) -> dict:
    """Occupied-cell volume across refinements.

    Ratios ``>= 0.8`` between successive refinements read as positive
    measure, ratios ``<= 0.5`` as measure zero.
    """
    resolutions = list(resolutions)
    if len(resolutions) < 2 or sorted(resolutions) != resolutions:
        raise DomainError("need at least two resolutions, coarsest first")
    if grids is None:
        n = n_samples or _default_samples(resolutions, ifs.d)
        grids = sample_grids(ifs, resolutions, n, mu, rng=rng)
    vols = [g.occupied_volume() for g in grids]
    ratios = [vols[i + 1] / vols[i] if vols[i] > 0 else 0.0 for i in range(len(vols) - 1)]
    if all(r >= 0.8 for r in ratios):
        verdict = "consistent with positive measure"
    elif all(r <= 0.5 for r in ratios):
        verdict = "consistent with measure zero"
    else:
        verdict = "undetermined"
    return {
        "certifying": False,
        "resolutions": resolutions,
        "occupied_volume": vols,
        "volume_ratios": ratios,
        "verdict": verdict,
    }
