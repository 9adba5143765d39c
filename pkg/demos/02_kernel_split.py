"""The Dirac Green kernel splits into a Cauchy part, a log part and a smooth rest.

Run: python demos/02_kernel_split.py
"""
import numpy as np

from diracbie.geometry import arc_length_reparametrize, ellipse
from diracbie.kernel import SpectralParams, bessel_k, green_kernel, split_arrays
from diracbie.validation import bessel_oracle

p = SpectralParams(1.0, 0.3)  # mass 1, z = 0.3 inside the gap
curve = arc_length_reparametrize(ellipse(2.0, 1.0))

# %% Evaluate both forms on pairs that get close to the diagonal.
t = np.full(6, 0.2)
s = t - np.logspace(-1, -6, 6)
pt, ps = curve.point(t), curve.point(s)
xi, f1, f2 = split_arrays(p, pt[:, 0] + 1j * pt[:, 1], ps[:, 0] + 1j * ps[:, 1],
                          t - s, curve.length)
cauchy = np.zeros_like(f1)
cauchy[:, 0, 1], cauchy[:, 1, 0] = 1 / xi, 1 / np.conj(xi)
logs = np.log(np.abs(2 * np.sin(np.pi * (t - s))))
split = (1j / (2 * np.pi)) * cauchy + f1 * logs[:, None, None] + f2
direct = green_kernel(p, pt - ps)
for d, a, b in zip(t - s, split, direct):
    print(f"t-s {d:.0e}  |G| {np.abs(b).max():9.3e}  reassembly error "
          f"{np.abs(a - b).max() / np.abs(b).max():.1e}")

# %% K0 and K1 against a 40-digit reference.
x = np.array([1e-3, 0.1, 1.0, 10.0, 30.0])
for order in (0, 1):
    rel = np.abs(bessel_k(order, x) / bessel_oracle("k", order, x) - 1)
    print(f"K{order} worst relative error {rel.max():.1e}")
