import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_interior.attractor import (CYLINDER_COVERED, POINT_SAMPLED, IfsInstance,
                                       OccupancyGrid, chaos_sample, code_point, code_points,
                                       detect_interior, largest_hit_disk,
                                       measure_lower_evidence, render_cylinder_cover,
                                       sample_grids, truncation_depth, truncation_error)
from affine_interior.linalg import DomainError, MapTuple, longest_common_prefix, rotation
from affine_interior.reports import read_pgm
from affine_interior.systems import control, grid25, single_map, unit_square


def random_ifs(seed, m=3, d=2, delta=0.6):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, d, d))
    M *= (delta * rng.uniform(0.5, 1, m) / np.array([np.linalg.norm(x, 2) for x in M]))[:, None, None]
    return IfsInstance(MapTuple(M), rng.uniform(-2, 2, (m, d)))


def test_zero_translations_code_to_origin():
    ifs = IfsInstance(MapTuple(np.array([0.5 * rotation(0.4), np.diag([0.3, 0.6])])), np.zeros((2, 2)))
    words = np.random.default_rng(0).integers(2, size=(50, 20))
    assert np.array_equal(code_points(ifs, words), np.zeros((50, 2)))
    assert truncation_depth(ifs, 1e-9) == 0


def test_constant_word_fixed_point():
    ifs = IfsInstance(MapTuple(np.array([0.45])), np.array([[1.0]]))
    n = truncation_depth(ifs, 1e-12)
    p = code_point(ifs, (0,) * n, eps=1e-12)
    assert abs(p[0] - 1 / 0.55) <= 1e-12
    assert p[0] == pytest.approx(1.8181818181818181, abs=1e-12)
    assert ifs.fixed_points()[0, 0] == pytest.approx(1 / 0.55, rel=1e-15)


def test_truncation_depth_formula():
    ifs = random_ifs(1)
    for eps in (1e-2, 1e-6, 1e-10):
        n = truncation_depth(ifs, eps)
        assert truncation_error(ifs, n) <= eps
        assert n == 0 or truncation_error(ifs, n - 1) > eps


def test_code_point_rejects_short_words():
    ifs = random_ifs(2)
    with pytest.raises(DomainError):
        code_point(ifs, (0, 1), eps=1e-8)


def test_truncation_error_certified():
    ifs = random_ifs(3)
    rng = np.random.default_rng(3)
    eps = 1e-4
    n = truncation_depth(ifs, eps)
    words = rng.integers(ifs.m, size=(200, n + 40))
    deep = code_points(ifs, words)
    short = code_points(ifs, words[:, :n])
    assert np.max(np.linalg.norm(deep - short, axis=1)) <= eps


def test_contraction_pairs():
    rng = np.random.default_rng(4)
    for k in range(10):
        ifs = random_ifs(100 + k)
        n = truncation_depth(ifs, 1e-12)
        x = rng.integers(ifs.m, size=(1000, n))
        y = x.copy()
        cut = rng.integers(0, n, size=1000)
        for i, c in enumerate(cut):
            y[i, c:] = rng.integers(ifs.m, size=n - c)
        px, py = code_points(ifs, x), code_points(ifs, y)
        common = np.array([len(longest_common_prefix(a, b)) for a, b in zip(x, y)])
        bound = ifs.tup.delta**common * 2 * ifs.bounding_radius + 2e-12
        assert np.all(np.linalg.norm(px - py, axis=1) <= bound)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_self_affinity_of_samples(seed):
    ifs = random_ifs(seed)
    eps = 1e-8
    pts, words = chaos_sample(ifs, 200, eps=eps, rng=seed, return_words=True)
    tail = code_points(ifs, words[:, 1:])
    first = words[:, 0]
    img = np.einsum("kij,kj->ki", ifs.tup.maps[first], tail) + ifs.translations[first]
    assert np.all(np.linalg.norm(img - pts, axis=1) <= 2 * eps)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_equal_matrices_common_translation(seed):
    rng = np.random.default_rng(seed)
    T = 0.7 * rotation(rng.uniform(0, 6)) @ np.diag([1, rng.uniform(0.3, 1)])
    u = rng.uniform(-3, 3, 2)
    ifs = IfsInstance(MapTuple(np.array([T] * 3)), np.array([u] * 3))
    words = rng.integers(3, size=(50, truncation_depth(ifs, 1e-12)))
    target = np.linalg.solve(np.eye(2) - T, u)
    assert np.all(np.linalg.norm(code_points(ifs, words) - target, axis=1) <= 1e-11)


def test_single_map_samples_at_fixed_point():
    ifs = single_map().ifs()
    pts = chaos_sample(ifs, 1000, eps=1e-9, rng=1)
    assert np.max(np.linalg.norm(pts - ifs.fixed_points()[0], axis=1)) <= 1e-9


def test_unit_square_sample_mean():
    ifs = unit_square().ifs()
    n = 100_000
    pts = chaos_sample(ifs, n, eps=1e-7, rng=5)
    sigma = math.sqrt(1 / 12 / n)
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) <= 4 * sigma)
    assert pts.min() >= -1e-7 and pts.max() <= 1 + 1e-7


def test_chaos_sample_deterministic(monkeypatch):
    ifs = grid25().ifs()
    a = chaos_sample(ifs, 70_000, rng=11)
    monkeypatch.setenv("AFFINE_INTERIOR_THREADS", "1")
    b = chaos_sample(ifs, 70_000, rng=11)
    monkeypatch.setenv("AFFINE_INTERIOR_THREADS", "3")
    c = chaos_sample(ifs, 70_000, rng=np.random.SeedSequence(11))
    assert a.tobytes() == b.tobytes() == c.tobytes()
    assert not np.array_equal(a, chaos_sample(ifs, 70_000, rng=12))


def test_invariant_ball_is_forward_invariant():
    for seed in range(20):
        ifs = random_ifs(seed)
        c, R = ifs.invariant_ball()
        moved = np.einsum("kij,j->ki", ifs.tup.maps, c) + ifs.translations - c
        assert np.all(np.linalg.norm(moved, axis=1) + ifs.tup.delta * R <= R * (1 + 1e-12))
        pts = chaos_sample(ifs, 2000, eps=1e-9, rng=seed)
        assert np.all(np.linalg.norm(pts - c, axis=1) <= R + 1e-9)


def test_depth_zero_cover_is_ball():
    ifs = unit_square().ifs()
    g = render_cylinder_cover(ifs, 0, 64, ball="origin", bounds=([-2, -2], [2, 2]))
    R = ifs.bounding_radius
    centres = g.lo + (np.indices((64, 64)).reshape(2, -1).T + 0.5) * g.cell
    inner = np.linalg.norm(centres, axis=1) <= R - g.cell[0]
    assert np.all(g.occupied.reshape(-1)[inner])
    assert g.provenance == CYLINDER_COVERED


def test_covers_nest():
    ifs = grid25().ifs()
    counts = [render_cylinder_cover(ifs, n, 256).occupied.sum() for n in (2, 3, 4)]
    assert counts[0] >= counts[1] >= counts[2]
    small = random_ifs(7)
    counts = [render_cylinder_cover(small, n, 256).occupied.sum() for n in (2, 4, 6)]
    assert counts[0] >= counts[1] >= counts[2]


def test_cover_sound_for_samples():
    for ifs in (random_ifs(8), control().ifs(), grid25().ifs()):
        g = render_cylinder_cover(ifs, 3, 200)
        pts = chaos_sample(ifs, 20_000, eps=1e-9, rng=3)
        assert np.all(g.contains_points(pts))


def test_single_map_cover_shrinks():
    ifs = single_map().ifs()
    g = render_cylinder_cover(ifs, 12, 64, bounds=([-1, -2], [3, 2]))
    assert g.occupied.sum() <= 4
    assert np.all(g.contains_points(ifs.fixed_points()))


def test_budget_flags_partial():
    g = render_cylinder_cover(grid25().ifs(), 6, 64, budget=1000)
    assert g.meta["partial"] and g.meta["depth"] == 2


def test_grid_hits_inside_and_monotone():
    ifs = random_ifs(9)
    g = OccupancyGrid.empty([-1, -1], [1, 1], 32, POINT_SAMPLED)
    before = g.counts.copy()
    pts = chaos_sample(ifs, 5000, rng=1)
    g.add_points(pts)
    assert np.all(g.counts >= before)
    inside = np.all(np.abs(pts) <= 1, axis=1)
    assert g.counts.sum() == inside.sum() == g.meta["samples"]


def test_pgm_round_trip():
    g = sample_grids(grid25().ifs(), [64], 20_000, rng=2)[0]
    data = g.to_pgm_bytes()
    assert data.startswith(b"P5\n64 64\n255\n")
    img = read_pgm(data)
    assert np.array_equal(img, np.minimum(g.counts, 255).T[::-1])
    rows = g.to_csv_text().splitlines()
    assert len(rows) == 64 and all(len(r.split(",")) == 64 for r in rows)


def test_largest_disk_of_full_grid():
    g = OccupancyGrid.empty([0, 0], [1, 1], 20, POINT_SAMPLED)
    g.counts[:] = 1
    centre, r = largest_hit_disk(g)
    assert r == pytest.approx(9.0)
    g.counts[:] = 0
    assert largest_hit_disk(g) == (None, 0.0)


def test_unit_square_interior_and_volume():
    ifs = unit_square().ifs()
    bounds = ([0, 0], [1, 1])
    grids = sample_grids(ifs, [64, 128], 16 * 128**2, rng=4, bounds=bounds)
    rep = detect_interior(ifs, [64, 128], grids=grids)
    assert rep["stable"] and not rep["certifying"]
    for row in rep["per_resolution"]:
        assert row["radius"] == pytest.approx(0.5, abs=0.05)
    ev = measure_lower_evidence(ifs, [64, 128], grids=grids)
    assert ev["verdict"] == "consistent with positive measure"
    assert all(abs(v - 1) <= 0.05 for v in ev["occupied_volume"])


def test_control_has_no_interior():
    ifs = control().ifs()
    rep = detect_interior(ifs, [128, 256, 512], n_samples=400_000, rng=6)
    assert rep["verdict"] == "no interior evidence"
    ev = measure_lower_evidence(ifs, [128, 256, 512], n_samples=400_000, rng=6)
    assert all(r <= 0.5 for r in ev["volume_ratios"])
    assert ev["verdict"] == "consistent with measure zero"


def test_single_map_volume_vanishes():
    ifs = single_map().ifs()
    grids = sample_grids(ifs, [64, 128, 256], 10_000, rng=0, bounds=([0, -1], [3, 2]))
    vols = [g.occupied_volume() for g in grids]
    assert all(b <= a / 3 for a, b in zip(vols, vols[1:]))
    ev = measure_lower_evidence(ifs, [64, 128, 256], grids=grids)
    assert ev["verdict"] == "consistent with measure zero"


def test_detect_interior_needs_two_resolutions():
    with pytest.raises(DomainError):
        detect_interior(unit_square().ifs(), [128])
    with pytest.raises(DomainError):
        detect_interior(unit_square().ifs(), [256, 128])
