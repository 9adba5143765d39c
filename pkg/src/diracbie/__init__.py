"""Boundary-integral spectral solver for two-dimensional Dirac operators with
electrostatic and Lorentz-scalar delta-shell interactions on closed curves."""

from .geometry import (Curve, CurveError, IntersectingLoopsError, LoopSystem, RawCurve,
                       arc_length_reparametrize, circle, ellipse, fourier_curve,
                       min_distance, star)
from .kernel import SpectralParams, bessel_i, bessel_k, green_kernel, kernel_split
from .bem import (assemble_cauchy, assemble_cz, build_quadrature, plemelj_check,
                  single_layer)
from .spectral import (CouplingPair, ScanConfig, bs_matrix, classify,
                       critical_cluster_diagnostic, critical_essential_point,
                       dual_coupling, eigenfunction, find_eigenvalues,
                       transmission_matrix)

__version__ = "0.1.0"
