"""Reference systems used by the demos, tests and example configs."""
from __future__ import annotations

import numpy as np

from .config import SystemConfig, make_config

GRID_DEMO_SEED = 20240611


def unit_square(seed: int = 0) -> SystemConfig:
    """Four half-scale maps; the attractor is ``[0,1]^2`` with Lebesgue measure."""
    maps = [0.5 * np.eye(2)] * 4
    trans = [(0, 0), (0.5, 0), (0, 0.5), (0.5, 0.5)]
    return make_config(maps, trans, seed, name="unit-square")


def grid25(seed: int = GRID_DEMO_SEED, noise: float = 0.05) -> SystemConfig:
    """25 maps ``0.45 I`` with translations on the 5x5 grid of ``[0,1]^2``.

    Each translation is moved by an independent uniform offset in
    ``[-noise, noise]^2`` drawn from ``seed``.
    """
    g = np.linspace(0.0, 1.0, 5)
    base = np.array([(x, y) for x in g for y in g])
    rng = np.random.default_rng(seed)
    trans = base + rng.uniform(-noise, noise, base.shape)
    return make_config([0.45 * np.eye(2)] * 25, trans, seed, name="grid25", noise=noise)


def five_maps(seed: int = 0) -> SystemConfig:
    """``x -> 0.45 x + i`` for ``i = 0..4`` on the line."""
    return make_config(np.full(5, 0.45), [[i] for i in range(5)], seed, name="five-maps")


def control(seed: int = 0) -> SystemConfig:
    """Two maps ``diag(0.3, 0.3)``; total determinant 0.18 so the attractor is null."""
    return make_config([np.diag([0.3, 0.3])] * 2, [(0, 0), (1, 0)], seed, name="control")


def single_map(seed: int = 0) -> SystemConfig:
    return make_config([0.45 * np.eye(2)], [(1.0, 0.5)], seed, name="single-map")


def diagonal_pair(seed: int = 0) -> SystemConfig:
    """Two commuting non-conformal maps with total determinant below one."""
    return make_config([np.diag([0.5, 0.3]), np.diag([0.4, 0.6])], [(0, 0), (1, 1)], seed,
                       name="diagonal-pair")


REFERENCE = {
    "unit_square": unit_square,
    "grid25": grid25,
    "five_maps": five_maps,
    "control": control,
    "single_map": single_map,
    "diagonal_pair": diagonal_pair,
}
