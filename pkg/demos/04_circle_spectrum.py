"""Boundary-element eigenvalues on the unit circle against the Bessel solution.

Run: python demos/04_circle_spectrum.py   (about 10 s)
"""
import warnings

from diracbie.geometry import arc_length_reparametrize, circle
from diracbie.spectral import ScanConfig, classify, find_eigenvalues
from diracbie.validation import circle_oracle, set_distance

warnings.simplefilter("ignore", RuntimeWarning)
curve = arc_length_reparametrize(circle())

for eta, tau in ((-3.0, 0.0), (2.0, 1.0)):
    print(f"coupling (eta, tau) = ({eta}, {tau}), regime {classify(eta, tau).regime}")
    exact = circle_oracle(1.0, 1.0, eta, tau).eigenvalues
    for n in (32, 64):
        rep = find_eigenvalues(curve, 1.0, n, ScanConfig(samples=200), couplings=(eta, tau))
        print(f"  N={n:3d}: {len(rep.values)} eigenvalues, distance to oracle "
              f"{set_distance(rep.values, exact):.1e}")
    print("  values:", " ".join(f"{z:+.10f}" for z in exact))
