"""Singular value function, t-value certificates and affinity dimension.

The quantity ``g_t(I) = alpha_d(T_I)**t * |det T_I|`` is
super-multiplicative, so ``S_n(t) = sum_{|I|=n} g_t(I)`` satisfies
``S_{a+b} >= S_a S_b``.  Any single depth with ``S_n(t) > 1`` therefore
certifies ``t(T_1..T_m) >= t``.  Only lower certificates are produced.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import (DomainError, MapTuple, batch_singular_values,
                     level_batches, singular_values, word_det, word_product)

CERTIFIED = "CertifiedAboveD"
INCONCLUSIVE = "Inconclusive"

CONFORMAL_TOL = 1e-9


def phi_s(M, s: float) -> float:
    """Singular value function of a single matrix.

    For ``0 <= s <= d`` this is ``a_1 ... a_k * a_{k+1}**(s-k)`` with
    ``k = floor(s)``; above ``d`` it is ``|det M|**(s/d)``.  ``0**0`` is 1.
    """
    if s < 0:
        raise DomainError(f"s must be non-negative, got {s}")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    sv = singular_values(M)
    return float(phi_from_sv(sv[None], s, np.array([abs(np.linalg.det(M))]))[0])


def phi_from_sv(sv: np.ndarray, s: float, absdet: np.ndarray | None = None) -> np.ndarray:
    """Vectorised ``phi^s`` from rows of descending singular values."""
    if s < 0:
        raise DomainError(f"s must be non-negative, got {s}")
    K, d = sv.shape
    if s > d:
        if absdet is None:
            absdet = np.prod(sv, axis=1)
        return np.abs(absdet) ** (s / d)
    k = int(math.floor(s))
    frac = s - k
    out = np.prod(sv[:, :k], axis=1) if k else np.ones(K)
    if k < d and frac > 0:
        out = out * sv[:, k] ** frac
    return out


def lower_phi_from_sv(sv: np.ndarray, s: float, absdet: np.ndarray | None = None) -> np.ndarray:
    """Super-multiplicative minorant of ``phi^s`` built from the *smallest*
    singular values: ``a_d ... a_{d-k+1} * a_{d-k}**(s-k)``."""
    return phi_from_sv(sv[:, ::-1], s, absdet)


def g_t(t_val: float, tup: MapTuple, I) -> float:
    """``alpha_d(T_I)**t * |det T_I|`` with ``g_t(empty) = 1``."""
    if t_val < 0:
        raise DomainError(f"t must be non-negative, got {t_val}")
    if len(I) == 0:
        return 1.0
    P = word_product(tup, I)
    absdet = abs(word_det(tup, I))
    inv = None
    if tup.d >= 3:
        inv = np.eye(tup.d)
        for i in I:
            inv = tup.inverses[i] @ inv
        inv = inv[None]
    sv = batch_singular_values(P[None], np.array([absdet]), inv)[0]
    return float(sv[-1] ** t_val * absdet)


def _level_logs(tup: MapTuple, n: int):
    """log alpha_d and log|det| for every word of length n, lexicographic."""
    la, ld = [], []
    for b in level_batches(tup, n):
        absdet = np.abs(b.dets)
        sv = batch_singular_values(b.prods, absdet, b.invs)
        la.append(np.log(sv[:, -1]))
        ld.append(np.log(absdet))
    return np.concatenate(la), np.concatenate(ld)


def level_g_sum(tup: MapTuple, n: int, t_val: float) -> float:
    """``sum_{|I|=n} g_t(I)`` by streaming enumeration, fixed word order."""
    parts = []
    for b in level_batches(tup, n):
        absdet = np.abs(b.dets)
        sv = batch_singular_values(b.prods, absdet, b.invs)
        parts.append(float(np.sum(sv[:, -1] ** t_val * absdet)))
    return math.fsum(parts)


def _sum_exp(logs: np.ndarray) -> float:
    return math.fsum(np.exp(logs)) if logs.size < 4096 else float(np.sum(np.exp(logs)))


def bisect_decreasing(f, lo: float, hi: float, tol: float, max_hi: float = 1e4):
    """Bracket the crossing of a decreasing ``f`` through 0.

    Returns ``(a, b)`` with ``f(a) >= 0 > f(b)`` and ``b - a <= tol``.
    ``hi`` is doubled until ``f(hi) < 0``; beyond ``max_hi`` the function
    is treated as flat and an error names the interval searched.
    """
    if f(lo) < 0:
        return lo, lo
    while f(hi) >= 0:
        lo, hi = hi, 2 * hi if hi > 0 else 1.0
        if hi > max_hi:
            raise ArithmeticError(
                f"no sign change of the pressure on s in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass
class TValueCertificate:
    witness_depth: int | None
    witness_sum: float
    lower_bound: float | None
    status: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def certify_t_above_d(tup: MapTuple, max_depth: int = 8, budget: int = 10**8,
                      tol: float = 1e-4, refine_budget: int = 1 << 20) -> TValueCertificate:
    """Search for a depth ``n`` with ``sum_{Sigma_n} g_d(I) > 1``.

    Levels are scanned in order; the first level whose sum exceeds 1
    stops the search (every multiple of it is then certified too).  On
    success the largest ``t`` with a level sum ``>= 1`` is bisected at the
    witness depth and, while the level fits in ``refine_budget`` words, at
    deeper levels; the best of these is ``lower_bound``.
    """
    if max_depth < 1:
        raise DomainError("max_depth must be >= 1")
    d, m = tup.d, tup.m
    nodes = 0
    sums = {}
    witness = None
    for n in range(1, max_depth + 1):
        if nodes + m**n > budget:
            break
        nodes += m**n
        sums[n] = level_g_sum(tup, n, float(d))
        if sums[n] > 1:
            witness = n
            break
    diag = {"level_sums": sums, "nodes": nodes,
            "max_normalized_sum": max((v ** (1 / k) for k, v in sums.items()), default=0.0)}
    if witness is None:
        diag["reason"] = "budget exhausted" if len(sums) < max_depth else "max_depth reached"
        best = max(sums.values(), default=0.0)
        return TValueCertificate(None, best, None, INCONCLUSIVE, diag)

    zeros = {}
    for n in range(witness, max_depth + 1):
        if n > witness and (m**n > refine_budget or nodes + m**n > budget):
            break
        nodes += m**n
        if m**n <= refine_budget:
            la, ld = _level_logs(tup, n)
            f = lambda t: _sum_exp(ld + t * la) - 1.0
        else:
            f = lambda t, n=n: level_g_sum(tup, n, t) - 1.0
        lo, _ = bisect_decreasing(f, float(d), float(d) + 1.0, tol)
        zeros[n] = lo
    diag["depth_zeros"] = zeros
    diag["nodes"] = nodes
    lower = max(zeros.values())
    return TValueCertificate(witness, sums[witness], lower, CERTIFIED, diag)


def default_t(cert: TValueCertificate, d: int, fraction: float = 0.9) -> float:
    """A ``t`` strictly inside ``(d, lower_bound)``."""
    if not cert.certified:
        raise DomainError("t-value not certified above d")
    return d + fraction * (cert.lower_bound - d)


@dataclass
class AffinityBracket:
    lower: float
    upper: float
    depth: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _simultaneous_triangular_eigs(tup: MapTuple, tol: float = 1e-9):
    """Eigenvalue moduli of every map in one consistent order, or None.

    A generic combination of the maps is Schur-decomposed; if its unitary
    basis triangularises every map, the diagonals give eigenvalues of all
    products in the same order.
    """
    rng = np.random.default_rng(12345)
    coeffs = rng.standard_normal(tup.m)
    G = np.tensordot(coeffs, tup.maps, axes=1)
    _, Q = scipy.linalg.schur(G.astype(complex), output="complex")
    eigs = []
    for T in tup.maps:
        R = Q.conj().T @ T @ Q
        low = np.tril(R, -1)
        if np.max(np.abs(low)) > tol * max(1.0, np.max(np.abs(R))):
            return None
        eigs.append(np.abs(np.diag(R)))
    return np.array(eigs)


def affinity_bracket(tup: MapTuple, depth: int = 8, tol: float = 1e-4,
                     budget: int = 1 << 22) -> AffinityBracket:
    """Certified bracket for the affinity dimension.

    Upper: ``phi^s`` is submultiplicative, so every depth-``k`` zero of
    ``(1/k) log sum phi^s(T_I)`` bounds the dimension from above.

    Lower: the best of three minorants of the pressure, each exactly
    super-multiplicative or multiplicative:
      * ``|det|**(s/d) <= phi^s``;
      * the smallest-singular-value product, evaluated at each depth;
      * for simultaneously triangularisable maps, the eigenvalue-ordered
        product along each ordering of the common basis.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if tol <= 0:
        raise DomainError("tol must be positive")
    d, m = tup.d, tup.m
    absdet = np.abs(tup.dets)

    s_hi0 = float(d)
    uppers, lowers_sm = {}, {}
    nodes = 0
    used = 0
    for k in range(1, depth + 1):
        if nodes + m**k > budget:
            break
        nodes += m**k
        used = k
        sv_parts, det_parts = [], []
        for b in level_batches(tup, k):
            ad = np.abs(b.dets)
            sv_parts.append(batch_singular_values(b.prods, ad, b.invs))
            det_parts.append(ad)
        sv = np.concatenate(sv_parts)
        ad = np.concatenate(det_parts)
        up = bisect_decreasing(lambda s: np.log(np.sum(phi_from_sv(sv, s, ad))) / k,
                               0.0, s_hi0, tol)
        lo = bisect_decreasing(lambda s: np.log(np.sum(lower_phi_from_sv(sv, s, ad))) / k,
                               0.0, s_hi0, tol)
        uppers[k] = up[1]
        lowers_sm[k] = lo[0]
    if used == 0:
        raise DomainError("budget too small for depth 1")

    det_low = bisect_decreasing(
        lambda s: np.log(np.sum(absdet ** (s / d))), 0.0, s_hi0, tol)[0]
    candidates = {"determinant": det_low,
                  "smallest_singular": max(lowers_sm.values())}
    eigs = _simultaneous_triangular_eigs(tup)
    if eigs is not None:
        best = 0.0
        for perm in itertools.permutations(range(d)):
            ordered = eigs[:, list(perm)]
            # ordered rows are not sorted, phi_from_sv just takes them in order
            f = lambda s: np.log(np.sum(phi_from_sv(ordered, s, absdet)))
            best = max(best, bisect_decreasing(f, 0.0, s_hi0, tol)[0])
        candidates["triangular_ordering"] = best
    # running minimum keeps the upper bounds monotone in depth
    run = math.inf
    upper_by_depth = {}
    for k in sorted(uppers):
        run = min(run, uppers[k])
        upper_by_depth[k] = run
    lower = max(candidates.values())
    upper = upper_by_depth[used]
    lower = min(lower, upper)
    return AffinityBracket(lower, upper, used,
                           {"upper_by_depth": upper_by_depth, "lower_candidates": candidates})


def norm_gate(tup: MapTuple, bound: float = 0.5) -> bool:
    return tup.delta < bound


def is_conformal(T: np.ndarray, tol: float = CONFORMAL_TOL) -> tuple[bool, float]:
    """Whether ``T^T T`` is a positive multiple of the identity (relative tol)."""
    G = T.T @ T
    c = np.trace(G) / T.shape[0]
    if c <= 0:
        return False, math.inf
    resid = float(np.linalg.norm(G - c * np.eye(T.shape[0]), 2) / c)
    return resid <= tol, resid


def check_tvalue_gate(tup: MapTuple, max_depth: int = 8, budget: int = 10**8) -> dict:
    cert = certify_t_above_d(tup, max_depth, budget)
    gate = norm_gate(tup)
    return {
        "norm_gate": gate,
        "max_norm": tup.delta,
        "t_value_status": cert.status,
        "witness_depth": cert.witness_depth,
        "witness_sum": cert.witness_sum,
        "t_lower_bound": cert.lower_bound,
        "certified": bool(gate and cert.certified),
    }


def check_conformal_gate(tup: MapTuple) -> dict:
    d = tup.d
    sv = batch_singular_values(tup.maps, np.abs(tup.dets), tup.inverses if tup.d >= 3 else None)
    absdet = np.abs(tup.dets)
    sum_i = float(np.sum(sv[:, -1] ** d * absdet))
    conf = [is_conformal(T) for T in tup.maps]
    conformal = all(c for c, _ in conf)
    sum_det_sq = float(np.sum(absdet**2))
    gate = norm_gate(tup)
    cond_i = sum_i > 1
    cond_ii = conformal and sum_det_sq > 1
    sum_det = float(np.sum(absdet))
    return {
        "norm_gate": gate,
        "max_norm": tup.delta,
        "sum_condition_i": sum_i,
        "condition_i": cond_i,
        "conformal": conformal,
        "conformal_residual": max(r for _, r in conf),
        "sum_det_squared": sum_det_sq,
        "condition_ii": cond_ii,
        "certified": bool(gate and (cond_i or cond_ii)),
        # the open conjecture; never used as a certificate
        "sum_det": sum_det,
        "conjecture_condition_informational": bool(gate and sum_det > 1),
    }


def commutator_norms(tup: MapTuple) -> tuple[float, tuple[int, int] | None]:
    worst, pair = 0.0, None
    for i in range(tup.m):
        for j in range(i + 1, tup.m):
            A, B = tup.maps[i], tup.maps[j]
            c = float(np.linalg.norm(A @ B - B @ A, 2))
            if c > worst:
                worst, pair = c, (i, j)
    return worst, pair


def default_commutator_tol(tup: MapTuple) -> float:
    return 1e-10 * tup.delta**2


def check_commuting_gate(tup: MapTuple, tol: float | None = None) -> dict:
    if tol is None:
        tol = default_commutator_tol(tup)
    if tol <= 0:
        raise DomainError("tol must be positive")
    worst, pair = commutator_norms(tup)
    commute = worst <= tol
    sum_det_sq = float(np.sum(np.abs(tup.dets) ** 2))
    gate = norm_gate(tup)
    return {
        "norm_gate": gate,
        "max_norm": tup.delta,
        "max_commutator_norm": worst,
        "commutator_tol": tol,
        "commute": commute,
        "offending_pair": None if commute else list(pair),
        "sum_det_squared": sum_det_sq,
        "certified": bool(gate and commute and sum_det_sq > 1),
    }
