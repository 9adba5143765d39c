import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracbie.bem import (GuardError, assemble_cauchy, assemble_cz, build_quadrature,
                          curve_distance, extrapolate_to_zero, plemelj_check, single_layer)
from diracbie.geometry import LoopSystem, arc_length_reparametrize, circle, ellipse
from diracbie.kernel import S0, S1, S2, S3


def _mode(n, k):
    return np.exp(2j * np.pi * k * np.arange(n) / n)


def test_quadrature_sizes():
    for bad in (8, 48, 100):
        with pytest.raises(ValueError):
            build_quadrature(bad)
    assert build_quadrature(32) is build_quadrature(32)


def test_log_rule_symbol_and_nyquist_weight():
    q = build_quadrature(32)
    sym = np.fft.fft(q.log[:, 0])
    k = np.abs(np.fft.fftfreq(32, 1 / 32))
    want = np.where(k == 0, 0.0, -0.5 / np.maximum(k, 1))
    want[16] = -0.5 / 32
    assert np.allclose(sym, want, atol=1e-15)
    assert np.allclose(q.log, q.log.T)


def test_cot_rule_lives_on_odd_offsets():
    q = build_quadrature(16)
    assert np.all(q.cot[~q.odd_mask] == 0)
    assert np.allclose(q.cot, -q.cot.T)


@pytest.mark.parametrize("name", ["circle", "ellipse", "star"])
def test_cz_is_hermitian_for_real_z(presets, name):
    assert assemble_cz(presets[name], 1.0, 0.45, 64).adjoint_defect() <= 1e-12


def test_cz_rotation_equivariance_on_circle(unit_circle):
    n = 32
    a = assemble_cz(unit_circle, 1.0, -0.3, n).matrix
    perm = np.r_[np.arange(1, n), 0]
    idx = np.r_[perm, perm + n]
    d = np.r_[np.ones(n), np.full(n, np.exp(2j * np.pi / n))]
    b = d.conj()[:, None] * a[np.ix_(idx, idx)] * d[None, :]
    assert np.abs(b - a).max() <= 1e-12 * np.abs(a).max()


def test_cz_converges_on_smooth_densities(presets):
    c = presets["ellipse"]
    vals = []
    for n in (32, 64, 128, 256):
        t = np.arange(n) / n
        dens = np.concatenate([np.cos(2 * np.pi * t), np.sin(4 * np.pi * t) + 0.3])
        out = assemble_cz(c, 1.0, 0.2, n).matrix @ dens
        vals.append(out.reshape(2, n)[:, :: n // 16])
    err = [np.abs(v - vals[-1]).max() / np.abs(vals[-1]).max() for v in vals[:-1]]
    # spectral convergence: each doubling gains well over a digit
    assert err[2] <= 1e-9
    assert err[1] <= err[0] / 100 and err[2] <= err[1] / 100


def test_two_loop_layout_and_far_coupling():
    a = arc_length_reparametrize(circle())
    b = arc_length_reparametrize(ellipse(1.2, 0.8, (5.0, 1.0)))
    sysm = LoopSystem((a, b), ((1, 0), (1, 0)))
    op = assemble_cz(sysm, 1.0, 0.1, (32, 64))
    assert op.matrix.shape == (192, 192)
    assert op.offsets == (0, 64) and op.sizes == (32, 64)
    alone = assemble_cz(b, 1.0, 0.1, 64).matrix
    assert np.allclose(op.block(1, 1), alone)
    assert op.adjoint_defect() <= 1e-12


def test_cauchy_square_is_identity(presets):
    for name in ("circle", "ellipse"):
        c, _ = assemble_cauchy(presets[name], 128)
        w = np.random.default_rng(5).standard_normal(41)
        u = sum(a * _mode(128, k) for a, k in zip(w, range(-20, 21)))
        assert np.linalg.norm(c @ (c @ u) - u) / np.linalg.norm(u) <= 1e-8


def test_cauchy_dual_is_the_adjoint(presets):
    c, cd = assemble_cauchy(presets["ellipse"], 64)
    assert np.abs(cd - c.conj().T).max() <= 1e-14 * np.abs(c).max()


def test_cauchy_dual_inverse_on_circle(unit_circle):
    c, cd = assemble_cauchy(unit_circle, 128)
    u = _mode(128, 3) + 0.5 * _mode(128, -11)
    assert np.linalg.norm(cd @ (c @ u) - u) / np.linalg.norm(u) <= 1e-8


def test_cauchy_dual_defect_on_ellipse_is_smoothing(presets):
    # C' C - I is a smoothing operator, not zero: large on low modes, decaying fast
    c, cd = assemble_cauchy(presets["ellipse"], 128)
    defect = [np.linalg.norm(cd @ (c @ _mode(128, k)) - _mode(128, k)) / np.sqrt(128)
              for k in (1, 8, 16, 24)]
    assert defect[0] > 0.1
    assert defect[1] < defect[0] / 10 and defect[3] < defect[0] * 1e-3


def test_single_layer_zero_density(unit_circle):
    out = single_layer(unit_circle, 1.0, 0.0, np.zeros(64), [[3.0, 0.0]])
    assert np.array_equal(out, np.zeros((1, 2)))


def test_single_layer_guard(unit_circle):
    dens = np.ones(64)
    with pytest.raises(GuardError):
        single_layer(unit_circle, 1.0, 0.0, dens, [[1.05, 0.0]])
    # oversampling relaxes the guard
    single_layer(unit_circle, 1.0, 0.0, dens, [[1.05, 0.0]], oversample=8)
    single_layer(unit_circle, 1.0, 0.0, dens, [[1.05, 0.0]], guard=False)


def test_single_layer_solves_the_free_equation(unit_circle):
    n, m, z = 64, 1.0, 0.35
    t = np.arange(n) / n
    dens = np.concatenate([np.exp(2j * np.pi * t), 0.2 * np.ones(n)])
    x, h = np.array([0.2, 0.3]), 1e-4
    f = lambda p: single_layer(unit_circle, m, z, dens, [p])[0]
    dx = (f(x + [h, 0]) - f(x - [h, 0])) / (2 * h)
    dy = (f(x + [0, h]) - f(x - [0, h])) / (2 * h)
    res = -1j * (S1 @ dx + S2 @ dy) + (m * S3 - z * S0) @ f(x)
    assert np.abs(res).max() <= 1e-6 * np.abs(f(x)).max()


def test_curve_distance(unit_circle):
    d = curve_distance(unit_circle, [[0.0, 0.0], [2.0, 0.0], [0.3, -0.4]])
    assert np.allclose(d, [1.0, 1.0, 0.5], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_extrapolation_is_exact_for_quadratics(c):
    h = [0.08, 0.04, 0.02]
    vals = [c[0] + c[1] * x + c[2] * x * x for x in h]
    assert extrapolate_to_zero(h, vals) == pytest.approx(c[0], abs=1e-10)


@pytest.mark.parametrize("z", [0.0, 0.5])
def test_jump_relations_on_the_circle(unit_circle, z):
    n = 256
    t = np.arange(n) / n
    dens = np.concatenate([np.exp(2j * np.pi * t), np.zeros(n)])
    rep = plemelj_check(unit_circle, 1.0, z, dens, [0.08, 0.04, 0.02], n=n, oversample=8)
    assert rep.average_residual <= 1e-3
    assert rep.jump_residual <= 1e-3


def test_jump_target_is_independent_of_z(unit_circle):
    n = 128
    t = np.arange(n) / n
    dens = np.concatenate([np.zeros(n), np.exp(-2j * np.pi * t)])
    jumps = []
    for z in (0.0, 0.5):
        rep = plemelj_check(unit_circle, 1.0, z, dens, [0.08, 0.04, 0.02], n=n, oversample=8,
                            n_targets=16)
        jumps.append(rep.inner - rep.outer)
    assert np.abs(jumps[0] - jumps[1]).max() <= 2e-3
