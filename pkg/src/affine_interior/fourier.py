"""Monte-Carlo Fourier transforms, truncated Sobolev energies and
numerical checks of the oscillatory-integral estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .attractor import code_points, seed_sequence
from .dimension import phi_s
from .linalg import DomainError, MapTuple, singular_values
from .reports import fmt_float

FREQ_CHUNK = 64


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere in ``R^d`` (2 for ``d = 1``)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------- transforms

def fourier_mc_many(cloud: np.ndarray, xis: np.ndarray):
    """Empirical transforms ``mean exp(-i <xi, x>)`` and their standard errors."""
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    if cloud.shape[0] == 0:
        raise DomainError("empty point cloud")
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    n = cloud.shape[0]
    vals = np.empty(len(xis), dtype=complex)
    errs = np.empty(len(xis))
    for lo in range(0, len(xis), FREQ_CHUNK):
        ph = xis[lo:lo + FREQ_CHUNK] @ cloud.T
        c, s = np.cos(ph), np.sin(ph)
        mc, ms = c.mean(axis=1), -s.mean(axis=1)
        vals[lo:lo + FREQ_CHUNK] = mc + 1j * ms
        # var of a unimodular average is 1 - |mean|^2 <= 1
        var = np.maximum(1.0 - mc**2 - ms**2, 0.0)
        errs[lo:lo + FREQ_CHUNK] = np.sqrt(var / n)
    return vals, errs


def fourier_mc(cloud: np.ndarray, xi) -> tuple[complex, float]:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    v, e = fourier_mc_many(cloud, xi[None])
    return complex(v[0]), float(e[0])


def _split_sq_modulus(cloud: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """``Re(F_1 conj F_2)`` from two disjoint halves: unbiased for ``|mu^|^2``."""
    h = cloud.shape[0] // 2
    if h < 1:
        raise DomainError("need at least two points")
    f1, _ = fourier_mc_many(cloud[:h], xis)
    f2, _ = fourier_mc_many(cloud[h:2 * h], xis)
    return (f1 * np.conj(f2)).real


# -------------------------------------------------------------------- energy

@dataclass
class EnergyEstimate:
    s: float
    R: float
    value: float
    stderr: float
    n_freq: int
    n_points: int


def annuli(R: float, kmin: int = -3):
    """Radial shells ``[0, 2^kmin], [2^k, 2^(k+1)], ...`` truncated at ``R``.

    Each shell is tagged with a stable index so that the same shell gets
    the same random stream for every ``R``.
    """
    out = [(0, 0.0, min(2.0**kmin, R))]
    k = kmin
    while 2.0**k < R:
        out.append((k - kmin + 1, 2.0**k, min(2.0 ** (k + 1), R)))
        k += 1
    return out


def _shell_frequencies(d: int, s: float, r0: float, r1: float, n: int,
                       g: np.random.Generator) -> np.ndarray:
    u = g.random(n)
    dirs = g.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # density proportional to r^(s-1) on [r0, r1]
    r = (r0**s + u * (r1**s - r0**s)) ** (1.0 / s)
    return dirs * r[:, None]


def truncated_energy(cloud: np.ndarray, s: float, R: float, n_freq: int = 512,
                     rng=0, kmin: int = -3) -> EnergyEstimate:
    """Estimate ``int_{|xi| <= R} |mu^(xi)|^2 |xi|^(s-d) dxi``.

    Frequencies are importance-sampled per dyadic shell with radial
    density ``r^(s-1)``, which cancels the weight, so each shell
    contributes ``surface * (r1^s - r0^s) / s`` times the mean of the
    split-sample ``|mu^|^2``.  ``n_freq`` is per shell.  Shell estimates
    are clipped at zero, so with common random numbers the value is
    non-decreasing along dyadic ``R``.  The stderr includes a rounding
    floor ``eps * sqrt(n_points) * sum|shell|`` for the cloud averages,
    which matters only when ``|mu^|`` is nearly constant.
    """
    if not s > 0:
        raise DomainError("s must be positive")
    if not R > 0:
        raise DomainError("R must be positive")
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    d = cloud.shape[1]
    root = seed_sequence(rng)
    surf = sphere_surface(d)
    total, var, nf, absum = 0.0, 0.0, 0, 0.0
    for idx, r0, r1 in annuli(R, kmin):
        ss = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (idx,))
        xis = _shell_frequencies(d, s, r0, r1, n_freq, np.random.default_rng(ss))
        y = _split_sq_modulus(cloud, xis)
        w = surf * (r1**s - r0**s) / s
        part = w * float(y.mean())
        total += max(part, 0.0)
        absum += abs(part)
        if n_freq > 1:
            var += (w * float(y.std(ddof=1))) ** 2 / n_freq
        nf += n_freq
    rounding = np.finfo(float).eps * math.sqrt(cloud.shape[0]) * absum
    return EnergyEstimate(s, R, total, math.sqrt(var + rounding**2), nf, cloud.shape[0])


def energy_curve(cloud, s: float, R_values, n_freq: int = 512, rng=0, kmin: int = -3):
    return [truncated_energy(cloud, s, R, n_freq, rng, kmin) for R in R_values]


def sobolev_estimate(cloud, s_values, R_max: float = 64.0, n_freq: int = 512,
                     rng=0, growth_tol: float = 0.1) -> dict:
    """Largest ``s`` whose truncated energy looks converged.

    A curve counts as stable when the last dyadic doubling of ``R`` adds
    at most ``growth_tol`` (relative).  This is an estimate only; when no
    ``s`` is stable the result says so instead of returning 0.
    """
    R_values = []
    R = R_max
    while R >= 1 and len(R_values) < 4:
        R_values.insert(0, R)
        R /= 2
    if len(R_values) < 2:
        raise DomainError("R_max must be at least 2")
    rows, best = [], None
    for s in sorted(s_values):
        curve = energy_curve(cloud, s, R_values, n_freq, rng)
        last, prev = curve[-1].value, curve[-2].value
        growth = (last - prev) / last if last > 0 else math.inf
        stable = growth <= growth_tol
        rows.append({"s": s, "R": R_values, "value": [c.value for c in curve],
                     "stderr": [c.stderr for c in curve], "last_growth": growth,
                     "stable": stable})
        if not stable:
            break
        best = s
    return {"estimate": best if best is not None else "no stable s found",
            "curves": rows, "note": "truncated-energy estimate, not a bound"}


# --------------------------------------------------------------------- bumps

@dataclass(frozen=True)
class BumpFunction:
    """``exp(1 - 1/(1 - |x-c|^2/rho^2))`` inside the ball, 0 outside.

    ``plateau=True`` gives a smooth function equal to 1 on ``B(c, rho)``
    and vanishing outside ``B(c, 2 rho)``.
    """

    center: np.ndarray
    radius: float
    plateau: bool = False

    @property
    def support_radius(self) -> float:
        return 2 * self.radius if self.plateau else self.radius

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.plateau:
            u = np.clip(r / self.radius - 1.0, 0.0, 1.0)
            a, b = _smooth_exp(1.0 - u), _smooth_exp(u)
            return a / (a + b)
        q = (r / self.radius) ** 2
        inside = q < 1
        gap = np.where(inside, 1.0 - q, 1.0)
        # exponent clamped so the boundary underflows cleanly to 0
        expo = np.maximum(1.0 - 1.0 / gap, -745.0)
        return np.where(inside, np.exp(expo), 0.0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center, dtype=float)
        return self.radial(np.linalg.norm(np.atleast_1d(x - c).reshape(-1, c.size), axis=1))

    def integral(self, dim: int) -> float:
        f = lambda r: float(self.radial(r)) * r ** (dim - 1)
        val, _ = integrate.quad(f, 0, self.support_radius, limit=200)
        return sphere_surface(dim) * val if dim > 1 else 2 * val


def _smooth_exp(u):
    u = np.asarray(u, dtype=float)
    pos = u > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)


# ------------------------------------------------------------ gradient bound

def gradient_bound(delta: float, depth: int) -> tuple[float, float]:
    """Lower bound ``(1-2delta)/(1-delta)`` and the truncation allowance."""
    return (1 - 2 * delta) / (1 - delta), 2 * delta ** (depth + 1) / (1 - delta)


def random_tuple(m: int, d: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """``m`` random invertible ``d x d`` matrices with largest norm exactly ``delta``."""
    while True:
        M = rng.standard_normal((m, d, d))
        norms = np.array([singular_values(T)[0] for T in M])
        M *= (delta * rng.uniform(0.2, 1.0, m) / norms)[:, None, None]
        j = int(rng.integers(m))
        M[j] *= delta / singular_values(M[j])[0]
        if np.all(np.abs(np.linalg.det(M)) > 1e-12):
            return M


def coefficient_matrices(T: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched ``U_j`` with ``pi(x) - pi(y) = sum_j U_j a_j`` for finite words.

    ``T`` is ``(K, m, d, d)``, ``x`` and ``y`` are ``(K, L)``; returns
    ``(K, m, d, d)`` with ``U_j = sum_{x_(k+1)=j} T_{x|k} - sum_{y_(p+1)=j} T_{y|p}``.
    """
    K, m, d, _ = T.shape
    U = np.zeros((K, m, d, d))
    Px = np.broadcast_to(np.eye(d), (K, d, d)).copy()
    Py = Px.copy()
    rows = np.arange(K)
    for k in range(x.shape[1]):
        np.add.at(U, (rows, x[:, k]), Px)
        np.add.at(U, (rows, y[:, k]), -Py)
        Px = Px @ T[rows, x[:, k]]
        Py = Py @ T[rows, y[:, k]]
    return U


def _finite_difference_check(T: np.ndarray, x, y, v, a0, step: float = 1e-5):
    m, d = T.shape[0], T.shape[1]
    tup = MapTuple(T)
    from .attractor import IfsInstance

    def F(avec):
        ifs = IfsInstance(tup, avec.reshape(m, d))
        pts = code_points(ifs, np.stack([x, y]))
        return float(v @ (pts[0] - pts[1]))

    a0 = a0.reshape(-1)
    fd = np.empty(m * d)
    for i in range(m * d):
        e = np.zeros(m * d)
        e[i] = step
        fd[i] = (F(a0 + e) - F(a0 - e)) / (2 * step)
    U = coefficient_matrices(T[None], x[None], y[None])[0]
    exact = np.einsum("i,jik->jk", v, U).reshape(-1)
    return float(np.max(np.abs(fd - exact)))


def verify_gradient_bound(trials: int, delta: float | None = None,
                          tup: MapTuple | None = None, depth: int = 40, rng=0,
                          m_range=(2, 4), d_range=(1, 3), fd_tol: float = 1e-6) -> dict:
    """Check ``|grad_a <v, pi(x) - pi(y)>| >= (1-2delta)/(1-delta)`` on random data.

    Words have length ``depth + 1``, so the truncated gradient differs
    from the exact one by at most ``2 delta^(depth+1)/(1-delta)``, which is
    subtracted from the bound.  Without ``tup`` a fresh random tuple with
    largest norm ``delta`` is drawn per trial.  One trial is also checked
    against central finite differences in ``a``.
    """
    if tup is not None:
        delta = tup.delta
    if delta is None or not 0 < delta < 0.5:
        raise DomainError("need 0 < delta < 1/2")
    g = np.random.default_rng(seed_sequence(rng))
    bound, trunc = gradient_bound(delta, depth)
    L = depth + 1
    worst = (math.inf, None)
    failures = 0
    fd_err = None
    done = 0
    while done < trials:
        if tup is None:
            m = int(g.integers(m_range[0], m_range[1] + 1))
            d = int(g.integers(d_range[0], d_range[1] + 1))
            K = min(1000, trials - done)
            T = np.stack([random_tuple(m, d, delta, g) for _ in range(K)])
        else:
            m, d = tup.m, tup.d
            K = min(1000, trials - done)
            T = np.broadcast_to(tup.maps, (K, m, d, d))
        x = g.integers(m, size=(K, L))
        y = g.integers(m, size=(K, L))
        # force distinct first letters
        y[:, 0] = (x[:, 0] + g.integers(1, m, size=K)) % m
        v = g.standard_normal((K, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        U = coefficient_matrices(np.asarray(T), x, y)
        grad = np.einsum("ki,kjil->kjl", v, U).reshape(K, -1)
        norms = np.linalg.norm(grad, axis=1)
        bad = norms < bound - trunc
        failures += int(bad.sum())
        i = int(np.argmin(norms))
        if norms[i] < worst[0]:
            worst = (float(norms[i]), {"x": x[i].tolist(), "y": y[i].tolist(),
                                       "v": v[i].tolist(), "maps": np.asarray(T[i]).tolist()})
        if fd_err is None:
            a0 = g.standard_normal((m, d))
            fd_err = _finite_difference_check(np.asarray(T[0]), x[0], y[0], v[0], a0)
        done += K
    return {
        "delta": delta,
        "depth": depth,
        "trials": trials,
        "bound": bound,
        "truncation_allowance": trunc,
        "min_gradient_norm": worst[0],
        "failures": failures,
        "witness": worst[1] if failures else None,
        "fd_max_abs_error": fd_err,
        "fd_agrees": fd_err is not None and fd_err <= fd_tol,
        "passed": failures == 0 and fd_err is not None and fd_err <= fd_tol,
    }


# -------------------------------------------------------- integral identities

def _sphere_moment(sv: np.ndarray, p: float, rtol: float = 1e-10) -> float:
    """``int_{S^(d-1)} |T^(-1) u|^p dsigma`` from the singular values of ``T``.

    In the eigenbasis of ``T T^*`` the integrand is
    ``(sum_i u_i^2 / sv_i^2)^(p/2)``.
    """
    inv2 = 1.0 / np.asarray(sv, dtype=float) ** 2
    d = inv2.size
    if d == 1:
        return 2.0 * inv2[0] ** (p / 2)
    if d == 2:
        f = lambda th: (inv2[0] * math.cos(th) ** 2 + inv2[1] * math.sin(th) ** 2) ** (p / 2)
        val, err = integrate.quad(f, 0, math.pi / 2, limit=500, epsrel=rtol,
                                  points=[math.pi / 4])
        if err > 1e-6 * abs(val):
            raise ArithmeticError(f"angular quadrature did not converge (err {err:g})")
        return 4 * val
    if d == 3:
        def f(z, phi):
            rho2 = 1 - z * z
            q = (inv2[0] * rho2 * math.cos(phi) ** 2 + inv2[1] * rho2 * math.sin(phi) ** 2
                 + inv2[2] * z * z)
            return q ** (p / 2)
        val, err = integrate.dblquad(f, 0, math.pi / 2, 0, 1, epsrel=rtol)
        if err > 1e-6 * abs(val):
            raise ArithmeticError(f"angular quadrature did not converge (err {err:g})")
        return 8 * val
    raise DomainError("d <= 3 supported")


def verify_prop_t(T, t: float, N: float) -> dict:
    """``int (1 + |Tx|)^(-N) |x|^t dx`` and its ratio ``LHS * alpha_d^t |det T|``.

    Substituting ``y = Tx`` and going polar separates the integral into
    ``B(t+d, N-t-d)`` times an angular moment of ``T^(-1)``.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    d = T.shape[0]
    if not t >= 0:
        raise DomainError("t must be >= 0")
    if not N > t + d:
        raise DomainError(f"need N > t + d, got N={N}, t={t}, d={d}")
    sv = singular_values(T)
    det = float(np.prod(sv))
    lhs = special.beta(t + d, N - t - d) * _sphere_moment(sv, t) / det
    return {"d": d, "t": t, "N": N, "lhs": lhs, "alpha_d": float(sv[-1]),
            "ratio": lhs * sv[-1] ** t * det}


def verify_prop_tds(T, t: float, N: float) -> dict:
    """``int (1 + |Tx|)^(-N) |x|^(t-d) dx`` and its ratio ``LHS * phi^t(T)``."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    d = T.shape[0]
    if not 0 < t < d or float(t).is_integer():
        raise DomainError(f"t must lie in (0, {d}) and not be an integer")
    if not N > t:
        raise DomainError("need N > t")
    sv = singular_values(T)
    det = float(np.prod(sv))
    lhs = special.beta(t, N - t) * _sphere_moment(sv, t - d) / det
    return {"d": d, "t": t, "N": N, "lhs": lhs, "phi": phi_s(T, t),
            "ratio": lhs * phi_s(T, t)}


def anisotropy_sweep(kind: str, t: float, N: float, alphas=(1e-3, 1e-1, 1.0),
                     kappas=(1, 10, 100, 1000)) -> dict:
    """Ratios over ``diag(alpha, alpha kappa)`` and their max/min spread."""
    fn = {"t": verify_prop_t, "tds": verify_prop_tds}.get(kind)
    if fn is None:
        raise DomainError(f"unknown sweep kind {kind!r}")
    rows = []
    for a in alphas:
        for k in kappas:
            r = fn(np.diag([a, a * k]), t, N)
            rows.append({"alpha": a, "kappa": k, "ratio": r["ratio"]})
    ratios = [r["ratio"] for r in rows]
    return {"kind": kind, "t": t, "N": N, "rows": rows,
            "spread": max(ratios) / min(ratios)}


def verify_reduce_integral(x, s: float) -> dict:
    """``int_R dy / (sum |x_i|^s + |y|^s)`` against ``1 / sum |x_i|^(s-1)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not s > 1:
        raise DomainError("s must exceed 1")
    if not np.any(x != 0):
        raise DomainError("x must be non-zero")
    A = float(np.sum(np.abs(x) ** s))
    knee = A ** (1 / s)
    f = lambda y: 1.0 / (A + y**s)
    inner, e1 = integrate.quad(f, 0, knee, epsabs=0, epsrel=1e-11, limit=200)
    outer, e2 = integrate.quad(f, knee, np.inf, epsabs=0, epsrel=1e-11, limit=200)
    val = 2 * (inner + outer)
    rhs = 1.0 / float(np.sum(np.abs(x) ** (s - 1)))
    return {"integral": val, "quad_error": 2 * (e1 + e2), "rhs": rhs, "ratio": val / rhs}


# ----------------------------------------------------------- stationary phase

def _projection_profile(psi: BumpFunction, dim: int):
    """``P(u) = int psi_0(u e + z) dz`` over the orthogonal hyperplane."""
    rho = psi.support_radius
    if dim == 1:
        return lambda u: float(psi.radial(abs(u)))
    surf = sphere_surface(dim - 1) if dim > 2 else 2.0

    def P(u):
        top = rho * rho - u * u
        if top <= 0:
            return 0.0
        g = lambda w: float(psi.radial(math.sqrt(u * u + w * w))) * w ** (dim - 2)
        val, _ = integrate.quad(g, 0, math.sqrt(top), limit=200, epsabs=1e-14)
        return surf * val

    return P


def bump_transform_modulus(psi: BumpFunction, dim: int, k: float) -> float:
    """``|psi^(w)|`` for ``|w| = k``; the bump is radial so only ``|w|`` matters."""
    P = _projection_profile(psi, dim)
    rho = psi.support_radius
    if k == 0:
        val, _ = integrate.quad(P, 0, rho, limit=200)
        return 2 * val
    val, _ = integrate.quad(P, 0, rho, weight="cos", wvar=k, limit=400)
    return abs(2 * val)


def phase_coefficients(tup: MapTuple, x, y) -> np.ndarray:
    """``c_j`` with ``pi^a(x) - pi^a(y) = sum_j c_j a_j`` (d = 1)."""
    x = np.asarray(x, dtype=np.int64)[None]
    y = np.asarray(y, dtype=np.int64)[None]
    return coefficient_matrices(tup.maps[None], x, y)[0, :, 0, 0]


def oscillatory_integral_brute(psi: BumpFunction, c: np.ndarray, xi: float,
                               nodes: int = 48) -> complex:
    """Tensor Gauss-Legendre value of ``int psi(a) exp(-i xi <c, a>) da``."""
    m = c.size
    rho = psi.support_radius
    z, w = np.polynomial.legendre.leggauss(nodes)
    center = np.asarray(psi.center, dtype=float)
    grids = np.meshgrid(*[center[j] + rho * z for j in range(m)], indexing="ij")
    weights = np.ones(())
    for _ in range(m):
        weights = np.multiply.outer(weights, rho * w)
    pts = np.stack([gr.reshape(-1) for gr in grids], axis=1)
    vals = psi(pts) * np.exp(-1j * xi * pts @ c)
    return complex(np.sum(vals * weights.reshape(-1)))


def verify_stationary_phase_small(tup: MapTuple, psi: BumpFunction, x, y, xis,
                                  N: float = 2.0) -> dict:
    """Normalised decay ``|I(xi)| (1 + |T_{x^y} xi|)^N`` over a sweep of ``xi``.

    With ``d = 1`` the phase is linear in ``a``: ``xi <c, a>``.  Hence
    ``|I(xi)|`` is the modulus of the bump's transform at ``|xi| |c|``,
    computed from its one-dimensional projection profile.  The words are
    taken as given (finite); their tails change ``c`` by at most
    ``2 delta^L / (1 - delta)`` per coordinate.
    """
    if tup.d != 1:
        raise DomainError("d = 1 only")
    if tup.m > 3:
        raise DomainError("m <= 3 only")
    x = tuple(int(i) for i in x)
    y = tuple(int(i) for i in y)
    if x == y:
        raise DomainError("words must differ")
    L = min(len(x), len(y))
    x, y = x[:L], y[:L]
    pre = 0
    while pre < L and x[pre] == y[pre]:
        pre += 1
    c = phase_coefficients(tup, x, y)
    Tw = float(np.prod(tup.maps[list(x[:pre]), 0, 0])) if pre else 1.0
    cn = float(np.linalg.norm(c))
    rows = []
    for xi in xis:
        mod = bump_transform_modulus(psi, tup.m, abs(xi) * cn)
        arg = abs(Tw * xi)
        rows.append({"xi": float(xi), "abs_integral": mod, "scaled_frequency": arg,
                     "normalized": mod * (1 + arg) ** N})
    norm = [r["normalized"] for r in rows]
    third = max(1, len(norm) // 3)
    growth = max(norm[-third:]) / max(norm[:third]) if max(norm[:third]) > 0 else 0.0
    return {
        "prefix_length": pre,
        "T_prefix": Tw,
        "coefficients": c.tolist(),
        "truncation_allowance": 2 * tup.delta**L / (1 - tup.delta),
        "N": N,
        "rows": rows,
        "max_normalized": max(norm),
        "tail_growth": growth,
        "bounded": growth <= 1.0,
    }


# ------------------------------------------------------------------ emitters

def curve_csv(rows, param: str = "parameter") -> str:
    """CSV with columns ``parameter,value,stderr``."""
    out = [f"{param},value,stderr\n"]
    for p, v, e in rows:
        out.append(f"{fmt_float(p)},{fmt_float(v)},{fmt_float(e)}\n")
    return "".join(out)
