"""Sumset splitting for commuting linear parts.

When the ``T_i`` commute, ``T_I`` depends only on the multidegree of
``I``.  A class ``A`` of words with ``#A * |det A|**t > 1`` gives the
sub-IFS ``{A x + a_I}``, whose attractor ``G`` sits inside ``K`` and
splits as ``E + F + v`` with ``F = A E + a_J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .attractor import (IfsInstance, chaos_sample, code_points, seed_sequence,
                        truncation_depth)
from .dimension import check_commuting_gate, default_commutator_tol
from .linalg import DomainError, MapTuple, word_product

MERGE_TOL = 1e-12


class SplitSearchError(DomainError):
    def __init__(self, msg: str, best_score: float):
        super().__init__(msg)
        self.best_score = best_score


@dataclass(frozen=True, eq=False)
class BlockClass:
    """All words of length ``N`` whose product equals ``A``.

    ``multidegrees`` lists every multidegree merged into the class (more
    than one when distinct letters share a matrix).
    """

    N: int
    multidegrees: tuple
    A: np.ndarray
    count: int
    t_val: float
    score: float

    @property
    def multidegree(self) -> tuple:
        return self.multidegrees[0]

    def rescore(self, t_val: float) -> "BlockClass":
        score = self.count * abs(float(np.linalg.det(self.A))) ** t_val
        return replace(self, t_val=t_val, score=score)


def multidegrees(m: int, N: int):
    """Tuples ``(p_1..p_m)`` of non-negative integers summing to ``N``."""
    if m == 1:
        yield (N,)
        return
    for p in range(N, -1, -1):
        for rest in multidegrees(m - 1, N - p):
            yield (p,) + rest


def multinomial(p) -> int:
    out = math.factorial(sum(p))
    for k in p:
        out //= math.factorial(k)
    return out


def class_matrix(tup: MapTuple, p) -> np.ndarray:
    A = np.eye(tup.d)
    for T, k in zip(tup.maps, p):
        if k:
            A = A @ np.linalg.matrix_power(T, k)
    return A


def enumerate_classes(tup: MapTuple, N: int, t_val: float,
                      merge_tol: float = MERGE_TOL) -> list[BlockClass]:
    """Distinct products at level ``N`` with multinomial word counts.

    Cost is the number of multidegrees, ``C(N+m-1, m-1)``, never ``m**N``.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    reps: list[list] = []
    for p in multidegrees(tup.m, N):
        A = class_matrix(tup, p)
        scale = max(1.0, float(np.max(np.abs(A))))
        for r in reps:
            if np.max(np.abs(r[0] - A)) <= merge_tol * scale:
                r[1].append(p)
                r[2] += multinomial(p)
                break
        else:
            reps.append([A, [p], multinomial(p)])
    out = []
    for A, ps, count in reps:
        score = count * abs(float(np.linalg.det(A))) ** t_val
        out.append(BlockClass(N, tuple(ps), A, count, t_val, score))
    return out


def _t_grid(t_min: float, t_max: float, t_step: float) -> list[float]:
    n = int(round((t_max - t_min) / t_step))
    # descending, excluding t_min itself
    return [round(t_max - k * t_step, 12) for k in range(n)]


def find_certified_block(tup: MapTuple, t_range=(2.0, 2.5), max_N: int = 4,
                         t_step: float = 0.01, comm_tol: float | None = None) -> BlockClass:
    """Smallest ``N``, then largest ``t`` on the grid, with a class scoring ``> 1``.

    Among the classes certified at that ``(N, t)`` the best score wins.
    """
    if comm_tol is None:
        comm_tol = default_commutator_tol(tup)
    gate = check_commuting_gate(tup, tol=comm_tol)
    if not gate["commute"]:
        raise DomainError(
            f"maps do not commute within {comm_tol:g}: pair {gate['offending_pair']}")
    t_min, t_max = t_range
    if not t_max > t_min:
        raise DomainError("empty t range")
    grid = _t_grid(t_min, t_max, t_step)
    best = 0.0
    for N in range(1, max_N + 1):
        classes = enumerate_classes(tup, N, grid[-1])
        for t in grid:
            scored = [c.rescore(t) for c in classes]
            top = max(scored, key=lambda c: c.score)
            best = max(best, top.score)
            if top.score > 1:
                return top
    raise SplitSearchError(
        f"no class with score > 1 for N <= {max_N}, t in ({t_min}, {t_max}]; "
        f"best score {best!r}", best)


def _multiset_perms(p):
    """Words with letter counts ``p`` in lexicographic order."""
    counts = list(p)
    n = sum(counts)
    word = []

    def rec():
        if len(word) == n:
            yield tuple(word)
            return
        for i, c in enumerate(counts):
            if c:
                counts[i] -= 1
                word.append(i)
                yield from rec()
                word.pop()
                counts[i] += 1

    yield from rec()


def class_words(block: BlockClass) -> list[tuple]:
    words = [w for p in block.multidegrees for w in _multiset_perms(p)]
    return sorted(words)


def block_translation(ifs: IfsInstance, I) -> np.ndarray:
    """``a_I = sum_k T_{i_1..i_k} a_{i_{k+1}}``, i.e. ``f_I(0)``."""
    out = np.zeros(ifs.d)
    P = np.eye(ifs.d)
    for i in I:
        out = out + P @ ifs.translations[i]
        P = P @ ifs.tup.maps[i]
    return out


@dataclass(frozen=True, eq=False)
class SplitCertificate:
    block: BlockClass
    J: tuple
    words: tuple
    Lambda: np.ndarray
    a_words: np.ndarray
    E_ifs: IfsInstance
    F_ifs: IfsInstance
    v: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        b = self.block
        return {
            "N": b.N,
            "multidegrees": [list(p) for p in b.multidegrees],
            "A": b.A.tolist(),
            "count": b.count,
            "t": b.t_val,
            "score": b.score,
            "J": list(self.J),
            "v": self.v.tolist(),
            "E_translations": self.E_ifs.translations.tolist(),
            "F_translations": self.F_ifs.translations.tolist(),
            "contraction": self.E_ifs.tup.delta,
        }


def build_split(ifs: IfsInstance, block: BlockClass, J=None,
                max_words: int = 1 << 16) -> SplitCertificate:
    if block.count > max_words:
        raise DomainError(f"class has {block.count} words, above max_words={max_words}")
    words = class_words(block)
    if J is None:
        J = words[0]
    J = tuple(int(j) for j in J)
    if len(J) != block.N:
        raise DomainError(f"J must have length {block.N}")
    TJ = word_product(ifs.tup, J)
    if np.max(np.abs(TJ - block.A)) > 1e-10 * max(1.0, float(np.max(np.abs(block.A)))):
        raise DomainError(f"J={list(J)} is not in the class (T_J != A)")
    A = block.A
    aJ = block_translation(ifs, J)
    a_words = np.array([block_translation(ifs, I) for I in words])
    A2 = A @ A
    maps = np.repeat(A2[None], len(words), axis=0)
    E = IfsInstance(MapTuple(maps), a_words + A @ aJ)
    F = IfsInstance(MapTuple(maps), aJ + a_words @ A.T)
    v = -np.linalg.solve(np.eye(ifs.d) - A, aJ)
    Lambda = np.array([I + J for I in words], dtype=np.int64)
    resid = float(np.max(np.abs((np.eye(ifs.d) - A) @ (-v) - aJ)))
    return SplitCertificate(block, J, tuple(words), Lambda, a_words, E, F, v,
                            {"v_residual": resid})


def one_sided_hausdorff(P: np.ndarray, Q: np.ndarray) -> tuple[float, int]:
    """``max_{p in P} dist(p, Q)`` and the index of the worst ``p``."""
    dist, _ = cKDTree(Q).query(P)
    i = int(np.argmax(dist))
    return float(dist[i]), i


def verify_split(ifs: IfsInstance, cert: SplitCertificate, n_samples: int = 10_000,
                 eps: float = 1e-3, rng=0, n_cloud: int | None = None) -> dict:
    """Sample-level checks of ``G = E + F + v`` inside ``K`` and ``F = A E + a_J``.

    Pairs ``(e, f)`` with block words ``(alpha_k)`` and ``(beta_k)`` are
    compared with the coded point of the interleaved word
    ``alpha_0 beta_0 alpha_1 beta_1 ...`` of ``K``; the construction makes
    them equal up to coding error.  Each sum must also lie within ``eps``
    of an independent ``K`` cloud (``100 * n_samples`` points unless
    given).  ``F`` and ``A E + a_J`` are compared on common words.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    acc = eps / 100
    seeds = seed_sequence(rng).spawn(2)
    # uniform block words, as for the measure on Lambda; one depth for E and F
    k = max(truncation_depth(cert.E_ifs, acc), truncation_depth(cert.F_ifs, acc), 1)
    g = np.random.default_rng(seeds[0])
    wa = g.integers(len(cert.words), size=(n_samples, k))
    wb = g.integers(len(cert.words), size=(n_samples, k))
    e = code_points(cert.E_ifs, wa)
    f = code_points(cert.F_ifs, wb)
    sums = e + f + cert.v

    blocks = np.array(cert.words, dtype=np.int64)
    inter = np.empty((n_samples, 2 * k, cert.block.N), dtype=np.int64)
    inter[:, 0::2] = blocks[wa]
    inter[:, 1::2] = blocks[wb]
    matched = code_points(ifs, inter.reshape(n_samples, -1))
    dev = np.linalg.norm(sums - matched, axis=1)
    i = int(np.argmax(dev))
    sum_dev = float(dev[i])

    Ae = e @ cert.block.A.T + block_translation(ifs, cert.J)
    f_same = code_points(cert.F_ifs, wa)
    h1, j1 = one_sided_hausdorff(f_same, Ae)
    h2, _ = one_sided_hausdorff(Ae, f_same)
    hausdorff = max(h1, h2)

    cloud = chaos_sample(ifs, n_cloud or 100 * n_samples, eps=acc, rng=seeds[1])
    nn, _ = cKDTree(cloud).query(sums)
    q = int(np.argmax(nn))

    sums_ok = sum_dev <= eps
    haus_ok = hausdorff <= eps
    cloud_ok = float(nn[q]) <= eps
    report = {
        "eps": eps,
        "coding_accuracy": acc,
        "n_samples": n_samples,
        "max_sum_deviation": sum_dev,
        "hausdorff_F_vs_AE": hausdorff,
        "hausdorff_one_sided": [h1, h2],
        "n_cloud": len(cloud),
        "nn_to_K_cloud_max": float(nn[q]),
        "nn_to_K_cloud_median": float(np.median(nn)),
        "sums_within_eps": sums_ok,
        "sums_near_K_cloud": cloud_ok,
        "F_equals_AE_plus_aJ": haus_ok,
        "passed": sums_ok and cloud_ok and haus_ok,
    }
    if not sums_ok:
        report["sum_witness"] = {"e": e[i].tolist(), "f": f[i].tolist(),
                                 "sum": sums[i].tolist(), "K_point": matched[i].tolist()}
    if not cloud_ok:
        report["cloud_witness"] = {"sum": sums[q].tolist(), "distance": float(nn[q])}
    if not haus_ok:
        report["hausdorff_witness"] = {"f": f_same[j1].tolist()}
    return report
