"""Curves, arc length and the periodic Fourier multipliers.

Run: python demos/01_curves_and_multipliers.py
"""
import numpy as np

from diracbie.fourier import apply_multiplier, hilbert_transform, lambda_alpha
from diracbie.geometry import arc_length_reparametrize, ellipse, star

# %% An ellipse and a five-armed star, reparametrized by arc length.
for raw in (ellipse(2.0, 1.0), star(1.0, 0.2, 5)):
    curve = arc_length_reparametrize(raw)
    t = np.linspace(0, 1, 9, endpoint=False)
    speed = np.linalg.norm(curve.derivatives(t)[1], axis=1)
    print(f"{type(raw).__name__:10s} length {curve.length:.12f}  |gamma'| spread "
          f"{np.ptp(speed):.1e}")

# %% The Hilbert transform acts on exp(2 pi i n t) as sign(n).
n = 128
t = np.arange(n) / n
for k in (-3, 0, 5):
    e = np.exp(2j * np.pi * k * t)
    print(f"H e_{k:+d} = {np.round((hilbert_transform(e) / e).mean().real, 12):+.0f} e_{k:+d}")

# %% Lambda^alpha has symbol (c0^2 + |n|)^(alpha/2); powers compose.
lam = lambda_alpha(1.0, 1.0)
u = np.cos(2 * np.pi * 3 * t) + 0.5j * np.sin(2 * np.pi * 7 * t)
twice = apply_multiplier(lambda_alpha(-1.0), apply_multiplier(lam, u))
print("Lambda^-1 Lambda^1 u - u:", np.abs(twice - u).max())
