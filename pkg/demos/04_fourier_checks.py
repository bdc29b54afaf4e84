"""Fourier side: empirical transforms, truncated energies and the
numerical checks of the integral estimates.

    python demos/04_fourier_checks.py
"""
import math

import numpy as np

from affine_interior.attractor import chaos_sample
from affine_interior.fourier import (anisotropy_sweep, energy_curve, fourier_mc,
                                     verify_gradient_bound, verify_reduce_integral)
from affine_interior.systems import grid25, unit_square

sq = chaos_sample(unit_square().ifs(), 20_000, eps=1e-7, rng=1)
for xi in ([0, 0], [math.pi, 0], [2 * math.pi, 2 * math.pi]):
    v, e = fourier_mc(sq, xi)
    print(f"unit square mu^({xi[0]:.3f}, {xi[1]:.3f}) = {v:.4f}  +- {e:.4f}")

# Energy curves: roughly flat in R means the truncated integral has settled.
for name, cfg in (("unit square", unit_square()), ("grid25", grid25())):
    cloud = chaos_sample(cfg.ifs(), 20_000, eps=1e-7, rng=2)
    for s in (1.0, 1.8):
        curve = energy_curve(cloud, s, [8, 16, 32, 64], n_freq=256, rng=3)
        vals = "  ".join(f"R={c.R:<3g}{c.value:9.3f}" for c in curve)
        print(f"{name:12s} s={s}: {vals}")

print()
for delta in (0.30, 0.49):
    rep = verify_gradient_bound(3000, delta=delta, rng=4)
    print(f"gradient bound delta={delta}: min {rep['min_gradient_norm']:.4f} vs "
          f"{rep['bound']:.4f}, failures {rep['failures']}")

for kind, t, N in (("t", 2.5, 6.0), ("tds", 1.5, 4.0)):
    sw = anisotropy_sweep(kind, t, N)
    print(f"anisotropy sweep {kind:3s}: ratio spread {sw['spread']:.3f}")

r = verify_reduce_integral([1.0], 2.0)
print(f"line integral with x=(1), s=2: {r['integral']:.12f} (pi = {math.pi:.12f})")
