import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.special import iv

from diracbie.geometry import LoopSystem, arc_length_reparametrize, circle, ellipse
from diracbie.kernel import GapError, S0, S3
from diracbie.spectral import (BSAssembler, CouplingError, EigenvalueEntry, RegimeError,
                               ScanConfig, bs_matrix, classify, cluster_counts,
                               critical_cluster_diagnostic, critical_essential_point,
                               dual_coupling, eigenfunction, excluded_neighborhoods,
                               find_eigenvalues, scan_sigma_min, transmission_matrix)

from conftest import set_gap
from oracle_values import CIRCLE_M1, RADIUS2_MINUS3_0

couplings = st.tuples(st.floats(-6, 6), st.floats(-6, 6))


def test_regimes():
    assert classify(0, 0).regime == "free"
    assert classify(2.5, 1.5).regime == "critical"
    assert classify(0, 2).regime == "confinement"
    assert classify(-3, 0).regime == "noncritical"
    assert classify(-3, 0).kind == "electrostatic" and classify(0, 1).kind == "lorentz-scalar"
    assert classify(2, 1).d == 3
    with pytest.raises(ValueError):
        classify(np.inf, 0)


def test_critical_point():
    assert critical_essential_point((2.5, 1.5), 1.0) == pytest.approx(-0.6)
    assert critical_essential_point((2.5, -1.5), 2.0) == pytest.approx(1.2)
    with pytest.raises(RegimeError):
        critical_essential_point((3, 0), 1.0)


@settings(max_examples=60, deadline=None)
@given(couplings)
def test_duality_is_an_involution(c):
    assume(abs(c[0] ** 2 - c[1] ** 2) > 1e-3)
    d = dual_coupling(c)
    back = dual_coupling(d)
    assert back.eta == pytest.approx(c[0], abs=1e-14 * max(1, abs(c[0])) * 1e3)
    assert back.tau == pytest.approx(c[1], abs=1e-14 * max(1, abs(c[1])) * 1e3)
    # d * d' = 16
    assert d.d * classify(*c).d == pytest.approx(16, rel=1e-10)


def test_dual_of_critical_is_critical():
    d = dual_coupling((2.5, 1.5))
    assert (d.eta, d.tau) == (-2.5, -1.5) and d.regime == "critical"
    with pytest.raises(CouplingError):
        dual_coupling((1, 1))


@settings(max_examples=40, deadline=None)
@given(couplings, st.floats(0, 2 * np.pi))
def test_transmission_matrix(c, angle):
    assume(abs(c[0] ** 2 - c[1] ** 2 + 4) > 1e-3)
    nu = (np.cos(angle), np.sin(angle))
    data = transmission_matrix(c, nu)
    sd = np.array([[0, nu[0] - 1j * nu[1]], [nu[0] + 1j * nu[1], 0]])
    assert np.allclose(data.R, 0.5j * sd @ (c[0] * S0 + c[1] * S3))
    assert np.allclose((S0 - data.R) @ data.M, S0 + data.R)


def test_confinement_projectors():
    data = transmission_matrix((0.0, 2.0), (0.6, 0.8))
    p, q = data.plus_projector, data.minus_projector
    assert data.M is None
    assert np.allclose(p + q, S0) and np.allclose(p @ p, p) and np.allclose(q @ q, q)


def test_free_coupling_gives_identity(unit_circle):
    op = bs_matrix(unit_circle, 1.0, 0.3, 32, couplings=(0, 0))
    assert np.allclose(op.matrix, np.eye(64)) and op.sigma_min == 1.0
    res = scan_sigma_min(unit_circle, 1.0, 32, ScanConfig(samples=11), couplings=(0, 0))
    assert np.all(res.sigma_min == 1.0)
    assert find_eigenvalues(unit_circle, 1.0, 32, ScanConfig(samples=21), couplings=(0, 0)).eigenvalues == ()


def test_excluded_neighborhood_guard(unit_circle):
    with pytest.raises(RegimeError):
        bs_matrix(unit_circle, 1.0, -0.61, 32, couplings=(2.5, 1.5))
    bs_matrix(unit_circle, 1.0, -0.61, 32, couplings=(2.5, 1.5), diagnostics=True)
    sysm = LoopSystem((unit_circle,), ((2.5, 1.5),))
    assert excluded_neighborhoods(sysm, 1.0) == [(-0.6, 0.04)]


def test_gap_errors(unit_circle):
    with pytest.raises(GapError):
        bs_matrix(unit_circle, 0.0, 0.0, 32, couplings=(1, 0))
    with pytest.raises(GapError):
        find_eigenvalues(unit_circle, 1.0, 32, ScanConfig(z_min=-1.5), couplings=(1, 0))


@pytest.fixture(scope="module")
def report_m3(unit_circle):
    return find_eigenvalues(unit_circle, 1.0, 64, ScanConfig(samples=400), couplings=(-3, 0))


def test_electrostatic_circle_matches_oracle(report_m3):
    assert set_gap(report_m3.values, CIRCLE_M1[(-3.0, 0.0)]) <= 1e-8
    assert all(e.multiplicity == 1 and e.accepted for e in report_m3.eigenvalues)
    assert report_m3.scan.shape == (400, 2)


def test_nullvectors(unit_circle, report_m3):
    bs = BSAssembler(LoopSystem((unit_circle,), ((-3, 0),)), 1.0, 64)
    for e in report_m3.eigenvalues:
        v = e.densities[:, 0]
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.linalg.norm(bs.matrix(e.z) @ v) <= 1e-8


def test_scan_is_deterministic_and_thread_independent(unit_circle):
    cfg = ScanConfig(samples=60)
    a = find_eigenvalues(unit_circle, 1.0, 32, cfg, couplings=(0, -3))
    b = find_eigenvalues(unit_circle, 1.0, 32, cfg, couplings=(0, -3))
    c = find_eigenvalues(unit_circle, 1.0, 32, ScanConfig(samples=60, threads=3),
                         couplings=(0, -3))
    assert np.array_equal(a.values, b.values) and np.array_equal(a.values, c.values)
    assert np.array_equal(a.scan, c.scan)
    assert set_gap(a.values, CIRCLE_M1[(0.0, -3.0)]) <= 1e-8


def test_circle_and_round_ellipse_agree():
    a = arc_length_reparametrize(circle())
    b = arc_length_reparametrize(ellipse(1.0, 1.0))
    cfg = ScanConfig(samples=50)
    ra = find_eigenvalues(a, 1.0, 32, cfg, couplings=(2, 1)).values
    rb = find_eigenvalues(b, 1.0, 32, cfg, couplings=(2, 1)).values
    assert np.array_equal(ra, rb)


def test_critical_scan_skips_the_excluded_neighborhood(unit_circle):
    rep = find_eigenvalues(unit_circle, 1.0, 64, ScanConfig(samples=400), couplings=(2.5, 1.5))
    assert rep.excluded == ((-0.6, 0.04),)
    assert np.all(np.abs(rep.scan[:, 0] + 0.6) >= 0.04 - 1e-12)
    assert set_gap(rep.values, CIRCLE_M1[(2.5, 1.5)]) <= 1e-8


def test_length_scaling(unit_circle):
    # x -> 2x turns (radius 1, mass 2) into (radius 2, mass 1) and z into z / 2
    big = arc_length_reparametrize(circle(2.0))
    cfg = ScanConfig(samples=400)
    a = find_eigenvalues(unit_circle, 2.0, 64, cfg, couplings=(-3, 0)).values
    b = find_eigenvalues(big, 1.0, 64, cfg, couplings=(-3, 0)).values
    assert set_gap(a / 2, b) <= 1e-8
    assert set_gap(b, RADIUS2_MINUS3_0) <= 1e-8


def test_cluster_diagnostic(unit_circle):
    rep = critical_cluster_diagnostic(unit_circle, 1.0, (32, 64, 128), couplings=(2.5, 1.5))
    assert rep.probes == (-0.6, 0.3)
    assert rep.increasing(-0.6) and rep.bounded(0.3)
    assert rep.fires_at == (-0.6,)
    with pytest.raises(RegimeError):
        critical_cluster_diagnostic(unit_circle, 1.0, couplings=(3, 0))
    control = cluster_counts(unit_circle, 1.0, (32, 64, 128), (0.0, -0.6), couplings=(3, 0))
    assert control.bounded(0.0) and control.bounded(-0.6)


def test_raw_operator_counts_grow_everywhere_when_critical(unit_circle):
    # the unscaled B(z) has singular values ~ 1/n at every z in the critical regime
    rep = cluster_counts(unit_circle, 1.0, (64, 128, 256), (0.3, -0.9), couplings=(2.5, 1.5),
                         operator="bs")
    assert rep.increasing(0.3) and rep.increasing(-0.9)
    control = cluster_counts(unit_circle, 1.0, (64, 128, 256), (0.3,), couplings=(3, 0),
                             operator="bs")
    assert control.bounded(0.3)


def test_eigenfunction_matches_the_disc_mode(unit_circle, report_m3):
    # z ~ -0.8445 sits in angular channel -3: u = (I_n(kr) e^{in th}, c I_{n+1}(kr) e^{i(n+1) th})
    entry = min(report_m3.eigenvalues, key=lambda e: abs(e.z + 0.8445152206))
    n, r = -3, 0.6
    th = np.arange(48) * 2 * np.pi / 48
    pts = r * np.stack([np.cos(th), np.sin(th)], axis=-1)
    u = eigenfunction(unit_circle, 1.0, entry, pts, n=64, couplings=(-3, 0))
    assert np.sum(np.abs(u) ** 2) == pytest.approx(1.0)
    for comp, order in ((0, n), (1, n + 1)):
        mode = np.exp(1j * order * th)
        corr = abs(np.vdot(mode, u[:, comp])) / (np.linalg.norm(mode) * np.linalg.norm(u[:, comp]))
        assert corr >= 1 - 1e-8
    k = np.sqrt(1 - entry.z ** 2)
    kappa = k / (entry.z + 1)
    ratio = u[0, 1] / u[0, 0]
    assert abs(ratio) == pytest.approx(kappa * iv(n + 1, k * r) / iv(n, k * r), rel=1e-6)


def test_eigenfunction_of_zero_density(unit_circle):
    entry = EigenvalueEntry(-0.5, 0.0, 1, np.zeros((64, 1)))
    u = eigenfunction(unit_circle, 1.0, entry, [[0.1, 0.2], [3.0, 0.0]], n=32,
                      couplings=(-3, 0))
    assert np.array_equal(u, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        eigenfunction(unit_circle, 1.0, EigenvalueEntry(-0.5, 0.0, 1, np.zeros((64, 1)), False),
                      [[0.1, 0.2]], n=32, couplings=(-3, 0))


def test_far_apart_loops_double_the_spectrum():
    a = arc_length_reparametrize(circle())
    b = arc_length_reparametrize(circle(1.0, (30.0, 0.0)))
    sysm = LoopSystem((a, b), ((-3, 0), (-3, 0)))
    rep = find_eigenvalues(sysm, 1.0, 32, ScanConfig(samples=200))
    want = np.repeat(CIRCLE_M1[(-3.0, 0.0)], 2)
    assert set_gap(rep.values, want) <= 1e-4
