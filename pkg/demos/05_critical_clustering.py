"""A critical coupling and its essential point.

For (eta, tau) = (2.5, 1.5) the point z = -tau/eta * m = -0.6 is not an
isolated eigenvalue. The number of tiny singular values of the scaled operator
grows with the discretization there and stays put elsewhere.

Run: python demos/05_critical_clustering.py
"""
from diracbie.geometry import arc_length_reparametrize, circle
from diracbie.spectral import critical_cluster_diagnostic, critical_essential_point

curve = arc_length_reparametrize(circle())
coupling = (2.5, 1.5)
print("essential point:", critical_essential_point(coupling, 1.0))

rep = critical_cluster_diagnostic(curve, 1.0, (64, 128, 256), probes=(-0.6, 0.3),
                                  couplings=coupling)
for z, counts in rep.counts.items():
    print(f"z={z:+.1f}: counts {counts}")
print("fires at:", rep.fires_at)
