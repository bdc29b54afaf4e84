"""Independent reference computations used by the tests.

Nothing here reuses the package's closed forms or enumeration code.
"""
import functools
import itertools
import math

import numpy as np
from scipy import integrate


def naive_product(maps, word):
    d = maps[0].shape[0]
    return functools.reduce(np.matmul, [maps[i] for i in word], np.eye(d))


def eig_singular_values(M):
    """Square roots of the eigenvalues of ``M^T M``, descending."""
    ev = np.linalg.eigvalsh(M.T @ M)
    return np.sqrt(np.clip(ev, 0, None))[::-1]


def naive_g(t, maps, word):
    if not word:
        return 1.0
    P = naive_product(maps, word)
    return eig_singular_values(P)[-1] ** t * abs(np.linalg.det(P))


def naive_level_sum(maps, n, t):
    return math.fsum(naive_g(t, maps, w) for w in itertools.product(range(len(maps)), repeat=n))


def conformal_t(m, r, d):
    return math.log(m) / math.log(1 / r) - d


def square_sq_modulus(x, y):
    """``|FT of Lebesgue on [0,1]^2|^2`` at ``(x, y)``."""
    def one(u):
        u = np.asarray(u, dtype=float)
        small = np.abs(u) < 1e-8
        safe = np.where(small, 1.0, u)
        return np.where(small, 1.0 - u**2 / 12, (2 * np.sin(safe / 2) / safe) ** 2)
    return one(x) * one(y)


def square_energy(s, R, panel=0.25, nodes=20, th_panels=512):
    """Polar composite Gauss-Legendre value of the truncated energy."""
    z, w = np.polynomial.legendre.leggauss(nodes)
    r_edges = np.unique(np.concatenate([[0.0, 1e-3, 1e-2, 0.1], np.arange(panel, R, panel), [R]]))
    t_edges = np.linspace(0, math.pi / 2, th_panels + 1)
    th = np.concatenate([(a + b) / 2 + (b - a) / 2 * z for a, b in zip(t_edges[:-1], t_edges[1:])])
    wt = np.concatenate([(b - a) / 2 * w for a, b in zip(t_edges[:-1], t_edges[1:])])
    total = 0.0
    for a, b in zip(r_edges[:-1], r_edges[1:]):
        r = (a + b) / 2 + (b - a) / 2 * z
        wr = (b - a) / 2 * w
        Rg, Tg = np.meshgrid(r, th, indexing="ij")
        f = square_sq_modulus(Rg * np.cos(Tg), Rg * np.sin(Tg)) * Rg ** (s - 1)
        total += float(np.sum(wr[:, None] * wt[None] * f))
    # the integrand is symmetric under both reflections
    return 4 * total


def polar_weighted_integral(T, t, N, power):
    """``int_{R^2} (1 + |Tx|)^(-N) |x|^power dx`` in polar coordinates of ``x``."""
    def radial(th):
        k = np.linalg.norm(T @ np.array([math.cos(th), math.sin(th)]))
        f = lambda r: (1 + k * r) ** (-N) * r ** (power + 1)
        return integrate.quad(f, 0, np.inf, limit=400, epsrel=1e-10)[0]
    val, _ = integrate.quad(radial, 0, 2 * math.pi, limit=400, epsrel=1e-8)
    return val


def line_weighted_integral(alpha, t, N, power):
    f = lambda x: (1 + abs(alpha * x)) ** (-N) * abs(x) ** power
    return 2 * integrate.quad(f, 0, np.inf, limit=500, epsrel=1e-11)[0]


def mp_product(maps, word, dps=50):
    """Exact-ish word product ``T_{w1} ... T_{wn}`` in mpmath."""
    import mpmath
    with mpmath.workdps(dps):
        d = maps.shape[1]
        P = mpmath.eye(d)
        for i in word:
            P = P * mpmath.matrix(maps[i].tolist())
        return P


def mp_det(maps, word, dps=50):
    import mpmath
    with mpmath.workdps(dps):
        return float(mpmath.det(mp_product(maps, word, dps)))


def mp_singular_values(maps, word, dps=50):
    import mpmath
    with mpmath.workdps(dps):
        sv = mpmath.svd_r(mp_product(maps, word, dps), compute_uv=False)
        return np.sort(np.array([float(x) for x in sv]))[::-1]
