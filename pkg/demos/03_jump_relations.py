"""Single-layer potential near the boundary: averages and jumps.

Approaching the unit circle from inside and outside and extrapolating to the
boundary recovers the Cauchy transform (average) and the density (jump).

Run: python demos/03_jump_relations.py
"""
import numpy as np

from diracbie.bem import plemelj_check
from diracbie.geometry import arc_length_reparametrize, circle

curve = arc_length_reparametrize(circle())
n = 512
t = np.arange(n) / n
density = np.concatenate([np.exp(2j * np.pi * t), np.zeros(n)])

for z in (0.0, 0.5):
    rep = plemelj_check(curve, 1.0, z, density, [0.08, 0.04, 0.02], n=n, oversample=8)
    print(f"z={z}: average residual {rep.average_residual:.1e}, "
          f"jump residual {rep.jump_residual:.1e}")
