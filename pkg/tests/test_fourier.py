import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_interior.attractor import chaos_sample
from affine_interior.fourier import (BumpFunction, anisotropy_sweep, bump_transform_modulus,
                                     coefficient_matrices, curve_csv, fourier_mc,
                                     fourier_mc_many, gradient_bound, oscillatory_integral_brute,
                                     phase_coefficients, random_tuple, sobolev_estimate,
                                     sphere_surface, truncated_energy, verify_gradient_bound,
                                     verify_prop_t, verify_prop_tds, verify_reduce_integral,
                                     verify_stationary_phase_small)
from affine_interior.linalg import DomainError, MapTuple, rotation
from affine_interior.systems import single_map, unit_square
from oracles import line_weighted_integral, polar_weighted_integral, square_energy


@pytest.fixture(scope="module")
def square_cloud():
    return chaos_sample(unit_square().ifs(), 100_000, eps=1e-7, rng=21)


def test_transform_at_zero_is_one(square_cloud):
    v, e = fourier_mc(square_cloud, [0.0, 0.0])
    assert v == 1.0 and e == 0.0


def test_square_transform_vanishes(square_cloud):
    v, e = fourier_mc(square_cloud, [2 * math.pi, 2 * math.pi])
    assert abs(v) <= 4 * e
    assert e <= 1 / math.sqrt(len(square_cloud))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_transform_modulus_at_most_one(seed):
    rng = np.random.default_rng(seed)
    cloud = rng.standard_normal((200, 2)) * rng.uniform(0.1, 10)
    vals, errs = fourier_mc_many(cloud, rng.standard_normal((50, 2)) * 30)
    assert np.all(np.abs(vals) <= 1 + 1e-12)
    assert np.all(errs <= 1 / math.sqrt(200) + 1e-15)


def test_point_mass_transform():
    ifs = single_map().ifs()
    eps = 1e-9
    cloud = chaos_sample(ifs, 100, eps=eps, rng=0)
    p = ifs.fixed_points()[0]
    xi = np.array([3.0, -7.0])
    v, _ = fourier_mc(cloud, xi)
    assert abs(v - np.exp(-1j * xi @ p)) <= np.linalg.norm(xi) * eps


def test_empty_cloud_rejected():
    with pytest.raises(DomainError):
        fourier_mc(np.zeros((0, 2)), [1.0, 0.0])


def test_square_energy_matches_quadrature(square_cloud):
    oracle = square_energy(1.5, 64)
    est = truncated_energy(square_cloud[:20_000], 1.5, 64, n_freq=512, rng=5)
    assert est.value >= 0 and est.stderr > 0
    assert abs(est.value - oracle) <= 3 * est.stderr


def test_point_mass_energy_closed_form():
    cloud = chaos_sample(single_map().ifs(), 2000, eps=1e-12, rng=0)
    s, R = 1.5, 64.0
    exact = sphere_surface(2) * R**s / s
    est = truncated_energy(cloud, s, R, n_freq=256, rng=2)
    # |mu^|^2 is 1 up to rounding, so the stderr is the rounding floor
    assert est.stderr < 1e-9 * exact
    assert abs(est.value - exact) <= 3 * est.stderr


def test_energy_monotone_in_R(square_cloud):
    c = square_cloud[:10_000]
    a = truncated_energy(c, 1.5, 32, n_freq=256, rng=9)
    b = truncated_energy(c, 1.5, 64, n_freq=256, rng=9)
    assert a.value <= b.value


@pytest.mark.slow
def test_energy_coverage_twenty_runs():
    ifs = unit_square().ifs()
    oracle = square_energy(1.5, 64)
    hits = 0
    for k in range(20):
        cloud = chaos_sample(ifs, 10_000, eps=1e-7, rng=100 + k)
        est = truncated_energy(cloud, 1.5, 64, n_freq=256, rng=200 + k)
        hits += abs(est.value - oracle) <= 2 * est.stderr
    assert hits >= 18


def test_energy_domain_errors(square_cloud):
    with pytest.raises(DomainError):
        truncated_energy(square_cloud[:10], 0.0, 8)
    with pytest.raises(DomainError):
        truncated_energy(square_cloud[:10], 1.0, -1)


def test_sobolev_estimate_reports_no_stable_s():
    cloud = chaos_sample(single_map().ifs(), 500, eps=1e-9, rng=0)
    rep = sobolev_estimate(cloud, [0.5, 1.0], R_max=16, n_freq=64)
    assert rep["estimate"] == "no stable s found"


def test_bump_function_profile():
    psi = BumpFunction(np.zeros(2), 1.0)
    assert psi(np.zeros(2))[0] == 1.0
    assert np.all(psi(np.array([[1.0, 0], [0, 1.5], [3, 3]])) == 0)
    near = psi(np.array([[1 - 1e-9, 0.0]]))[0]
    assert 0 <= near < 1e-300 or near == 0
    r = np.linspace(0, 0.999, 200)
    vals = psi.radial(r)
    assert np.all(np.diff(vals) <= 0) and np.all(np.isfinite(vals))
    plateau = BumpFunction(np.zeros(1), 0.5, plateau=True)
    assert np.all(plateau.radial(np.linspace(0, 0.5, 20)) == 1.0)
    assert plateau.radial(1.0) == 0.0 and plateau.support_radius == 1.0


def test_gradient_bound_value():
    b, trunc = gradient_bound(0.45, 40)
    assert b == pytest.approx(0.181818181818, rel=1e-10)
    assert trunc == pytest.approx(2 * 0.45**41 / 0.55)


def test_coefficients_match_coding_map():
    rng = np.random.default_rng(1)
    from affine_interior.attractor import IfsInstance, code_points
    M = random_tuple(3, 2, 0.45, rng)
    a = rng.standard_normal((3, 2))
    x = rng.integers(3, size=(1, 12))
    y = rng.integers(3, size=(1, 12))
    U = coefficient_matrices(M[None], x, y)[0]
    ifs = IfsInstance(MapTuple(M), a)
    pts = code_points(ifs, np.vstack([x, y]))
    assert np.allclose(np.einsum("jik,jk->i", U, a), pts[0] - pts[1], atol=1e-14)


def test_random_tuple_norm():
    M = random_tuple(4, 3, 0.3, np.random.default_rng(0))
    norms = [np.linalg.norm(T, 2) for T in M]
    assert max(norms) == pytest.approx(0.3, rel=1e-12)


@pytest.mark.parametrize("delta", [0.30, 0.45, 0.49])
def test_gradient_bound_sweep(delta):
    rep = verify_gradient_bound(2000, delta=delta, rng=int(delta * 100))
    assert rep["failures"] == 0
    assert rep["fd_agrees"] and rep["passed"]
    assert rep["min_gradient_norm"] >= rep["bound"] - rep["truncation_allowance"]


def test_gradient_bound_needs_small_delta():
    with pytest.raises(DomainError):
        verify_gradient_bound(10, delta=0.6)


def test_prop_t_one_dimensional_substitution():
    t, N = 1.3, 4.0
    c = line_weighted_integral(1.0, t, N, t)
    for a in (1e-3, 1e-1, 1.0):
        r = verify_prop_t(np.array([[a]]), t, N)
        assert r["lhs"] == pytest.approx(a ** (-t - 1) * c, rel=1e-8)
        assert r["ratio"] == pytest.approx(c, rel=1e-8)


def test_prop_t_identity_polar():
    t, N = 2.5, 6.0
    r = verify_prop_t(np.eye(2), t, N)
    assert r["lhs"] == pytest.approx(polar_weighted_integral(np.eye(2), t, N, t), rel=1e-2)


def test_prop_t_anisotropic_vs_direct():
    T = np.array([[0.3, 0.1], [0.0, 2.0]])
    r = verify_prop_t(T, 2.5, 6.0)
    assert r["lhs"] == pytest.approx(polar_weighted_integral(T, 2.5, 6.0, 2.5), rel=1e-2)


def test_prop_tds_one_dimensional():
    t, N = 0.5, 3.0
    c = line_weighted_integral(1.0, t, N, t - 1)
    for a in (1e-3, 1e-1, 1.0):
        r = verify_prop_tds(np.array([[a]]), t, N)
        assert r["phi"] == pytest.approx(a**0.5, rel=1e-12)
        assert r["ratio"] == pytest.approx(c, rel=1e-2)


def test_prop_tds_direct_2d():
    T = np.diag([0.5, 4.0])
    r = verify_prop_tds(T, 1.5, 4.0)
    assert r["lhs"] == pytest.approx(polar_weighted_integral(T, 1.5, 4.0, -0.5), rel=1e-2)


def test_prop_tds_rejects_integer_t():
    with pytest.raises(DomainError):
        verify_prop_tds(np.eye(2), 1.0, 4.0)
    with pytest.raises(DomainError):
        verify_prop_tds(np.eye(2), 2.5, 4.0)


@pytest.mark.parametrize("kind,t,N", [("t", 2.5, 6.0), ("tds", 1.5, 4.0)])
def test_anisotropy_spread(kind, t, N):
    rep = anisotropy_sweep(kind, t, N)
    assert rep["spread"] <= 50
    assert len(rep["rows"]) == 12


def test_reduce_integral_pi_and_scaling():
    r = verify_reduce_integral([1.0], 2.0)
    assert r["ratio"] == pytest.approx(math.pi, rel=1e-3)
    x = np.array([0.7, 2.0])
    base = verify_reduce_integral(x, 2.5)
    for lam in (1e-3, 1e-2, 1e-1, 1, 10, 100, 1e3):
        r = verify_reduce_integral(lam * x, 2.5)
        assert r["integral"] == pytest.approx(base["integral"] * lam ** (1 - 2.5), rel=1e-6)
        assert r["ratio"] == pytest.approx(base["ratio"], rel=1e-6)


def test_reduce_integral_extreme_coordinates():
    ratios = [verify_reduce_integral([1e4, 1e-4], s)["ratio"] for s in (1.5, 2, 3)]
    assert all(0.5 < r < 10 for r in ratios)


def test_brute_vs_profile_transform():
    psi = BumpFunction(np.array([0.2, -0.1]), 0.5)
    c = np.array([0.6, -0.8])
    for xi in (0.0, 3.0, 12.0):
        brute = abs(oscillatory_integral_brute(psi, c, xi, nodes=64))
        prof = bump_transform_modulus(psi, 2, xi * np.linalg.norm(c))
        assert brute == pytest.approx(prof, rel=1e-6, abs=1e-10)


def test_zero_frequency_gives_bump_integral():
    tup = MapTuple(np.array([0.4, 0.3]))
    psi = BumpFunction(np.zeros(2), 0.5)
    rep = verify_stationary_phase_small(tup, psi, (0, 1, 1), (1, 0, 0), [0.0, 1.0])
    assert rep["rows"][0]["abs_integral"] == pytest.approx(psi.integral(2), rel=1e-8)


def test_stationary_phase_bounded():
    tup = MapTuple(np.array([0.4, 0.35]))
    psi = BumpFunction(np.zeros(2), 0.5)
    x = (0,) + (1, 0) * 10
    y = (1,) + (0, 1) * 10
    rep = verify_stationary_phase_small(tup, psi, x, y, np.logspace(0, 3, 13))
    assert rep["bounded"] and rep["prefix_length"] == 0


def test_longer_prefix_shifts_onset():
    tup = MapTuple(np.array([0.4, 0.35]))
    psi = BumpFunction(np.zeros(2), 0.5)
    tail_x, tail_y = (0, 1) * 8, (1, 0) * 8
    short = verify_stationary_phase_small(tup, psi, (0,) + tail_x, (1,) + tail_y, [10.0])
    long = verify_stationary_phase_small(tup, psi, (0, 0, 0) + tail_x, (0, 0, 1) + tail_y, [10.0])
    assert long["T_prefix"] == pytest.approx(0.16)
    assert long["rows"][0]["scaled_frequency"] < short["rows"][0]["scaled_frequency"]
    c = phase_coefficients(tup, (0, 0, 0) + tail_x, (0, 0, 1) + tail_y)
    assert np.linalg.norm(c) <= 0.16 * 2 / (1 - 0.4) + 1e-12


def test_curve_csv_columns():
    text = curve_csv([(1.0, 2.5, 0.1), (2.0, 3.0, 0.2)], "R")
    lines = text.splitlines()
    assert lines[0] == "R,value,stderr" and lines[1] == "1,2.5,0.10000000000000001"
