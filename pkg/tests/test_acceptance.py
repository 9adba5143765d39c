"""The nine acceptance criteria at their stated tolerances and time budgets.

Each test records a one-line verdict that is printed in the terminal summary.
"""

import io
import time
import warnings

import numpy as np
import pytest

from diracbie import bem, cli
from diracbie.bem import assemble_cauchy, build_quadrature, plemelj_check
from diracbie.fourier import apply_multiplier, hilbert_transform, lambda_alpha
from diracbie.geometry import LoopSystem, arc_length_reparametrize, circle, ellipse, star
from diracbie.kernel import SpectralParams, bessel_i, bessel_k, green_kernel, split_arrays
from diracbie.spectral import (ScanConfig, cluster_counts, critical_cluster_diagnostic,
                               dual_coupling, find_eigenvalues)
from diracbie.validation import BATTERY, bessel_oracle, circle_oracle, set_distance

from conftest import record_criterion

pytestmark = pytest.mark.slow
M = 1.0


def _roots(curve, coupling, n, samples=400):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return find_eigenvalues(curve, M, n, ScanConfig(samples=samples), couplings=coupling).values


def _oracle(coupling):
    exclude = ((-0.6, 0.04),) if coupling == (2.5, 1.5) else ()
    return circle_oracle(1.0, M, *coupling, exclude=exclude).eigenvalues


@pytest.fixture(scope="module")
def unit():
    return arc_length_reparametrize(circle())


def test_criterion_1_fourier_identities():
    t0 = time.perf_counter()
    n = 256
    t = np.arange(n) / n
    rule = build_quadrature(n).log_sin
    lam = lambda_alpha(1.0, 1.0)
    worst = {"hilbert": 0.0, "klog": 0.0, "k(n)": 0.0}
    for k in range(-32, 33):
        e = np.exp(2j * np.pi * k * t)
        worst["hilbert"] = max(worst["hilbert"], np.abs(hilbert_transform(e) - np.sign(k) * e).max())
        want = -np.log(2) if k == 0 else -0.5 / abs(k)
        worst["klog"] = max(worst["klog"], np.abs(rule @ e - want * e).max())
        got = e + 2 * apply_multiplier(lam, rule @ apply_multiplier(lam, e))
        want = 1 - 2 * np.log(2) if k == 0 else -1 / abs(k)
        worst["k(n)"] = max(worst["k(n)"], np.abs(got - want * e).max())
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-12 and dt < 5
    record_criterion(1, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                     + f" (tol 1e-12), {dt:.1f}s")
    assert ok


def _dual_inverse_residual(raw):
    c, cd = assemble_cauchy(arc_length_reparametrize(raw), 128)
    rng = np.random.default_rng(2)
    coef = np.zeros(128, complex)
    idx = np.r_[0:33, 96:128]  # |n| <= 32
    coef[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    u = np.fft.ifft(coef) * 128
    return np.linalg.norm(cd @ (c @ u) - u) / np.linalg.norm(u)


@pytest.mark.xfail(strict=True, reason="C'C - I is a nonzero smoothing operator on a "
                                        "non-circular loop; see the decision log")
def test_criterion_2_cauchy_near_inverse():
    t0 = time.perf_counter()
    res_c = _dual_inverse_residual(circle())
    res_e = _dual_inverse_residual(ellipse(2.0, 1.0))
    dt = time.perf_counter() - t0
    ok = res_c <= 1e-8 and res_e <= 1e-8 and dt < 10
    record_criterion(2, ok, f"circle {res_c:.1e}, ellipse {res_e:.1e} (tol 1e-8), {dt:.1f}s")
    assert res_c <= 1e-8  # the circle half holds
    assert ok


def test_criterion_3_kernel_reassembly_and_bessel():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_split = 0.0
    for raw in (circle(), ellipse(2.0, 1.0), star(1.0, 0.2, 5)):
        curve = arc_length_reparametrize(raw)
        t, s = rng.random(1000), rng.random(1000)
        pt, ps = curve.point(t), curve.point(s)
        p = SpectralParams(M, 0.3)
        xi, f1, f2 = split_arrays(p, pt[:, 0] + 1j * pt[:, 1], ps[:, 0] + 1j * ps[:, 1],
                                  t - s, curve.length)
        cauchy = np.zeros_like(f1)
        cauchy[:, 0, 1], cauchy[:, 1, 0] = 1 / xi, 1 / np.conj(xi)
        lf = np.log(np.abs(2 * np.sin(np.pi * (t - s))))
        split = (1j / (2 * np.pi)) * cauchy + f1 * lf[:, None, None] + f2
        direct = green_kernel(p, pt - ps)
        rel = np.abs(split - direct).max(axis=(1, 2)) / np.abs(direct).max(axis=(1, 2))
        worst_split = max(worst_split, rel.max())
    x = np.logspace(-3, np.log10(30), 1000)
    worst_bessel = 0.0
    for order in (0, 1):
        want = bessel_oracle("k", order, x)
        worst_bessel = max(worst_bessel, np.max(np.abs(bessel_k(order, x) - want) / want))
    dt = time.perf_counter() - t0
    ok = worst_split <= 1e-12 and worst_bessel <= 1e-13 and dt < 10
    record_criterion(3, ok, f"split {worst_split:.1e} (tol 1e-12), K0/K1 {worst_bessel:.1e} "
                            f"(tol 1e-13), {dt:.1f}s")
    assert ok


def test_criterion_4_jump_relations(unit):
    t0 = time.perf_counter()
    n = 512
    t = np.arange(n) / n
    dens = np.concatenate([np.exp(2j * np.pi * t), np.zeros(n)])
    parts = []
    worst = 0.0
    for z in (0.0, 0.5):
        rep = plemelj_check(unit, M, z, dens, [0.08, 0.04, 0.02], n=n, oversample=8)
        worst = max(worst, rep.average_residual, rep.jump_residual)
        parts.append(f"z={z:g}: avg {rep.average_residual:.1e} jump {rep.jump_residual:.1e}")
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and dt < 30
    record_criterion(4, ok, "; ".join(parts) + f" (tol 1e-3), {dt:.1f}s")
    assert ok


def test_criterion_5_circle_oracle(unit):
    t0 = time.perf_counter()
    worst, ratios_ok, notes = 0.0, True, []
    for c in BATTERY:
        oracle = _oracle(c)
        errs = [set_distance(_roots(unit, c, n), oracle) for n in (32, 64, 128)]
        worst = max(worst, errs[-1])
        for a, b in zip(errs[:-1], errs[1:]):
            # a doubling must gain a digit unless both sizes already sit at roundoff
            if not (b <= a / 10 or max(a, b) <= 1e-11):
                ratios_ok = False
        notes.append(f"{c}: " + "/".join(f"{e:.0e}" for e in errs))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and ratios_ok and dt < 300
    record_criterion(5, ok, f"max |dz| at N=128 {worst:.1e} (tol 1e-8); N=32/64/128 errors "
                            + ", ".join(notes) + f"; {dt:.0f}s")
    assert ok


def test_criterion_6_symmetries(unit):
    t0 = time.perf_counter()
    n = 64
    worst_dual = worst_neg = 0.0
    for c in BATTERY:
        base = _roots(unit, c, n)
        d = dual_coupling(c)
        worst_dual = max(worst_dual, set_distance(base, _roots(unit, (d.eta, d.tau), n)))
        worst_neg = max(worst_neg, set_distance(base, -_roots(unit, (-c[0], c[1]), n)))
    crit = set_distance(_roots(unit, (2.5, 1.5), n), _roots(unit, (-2.5, -1.5), n))
    dt = time.perf_counter() - t0
    ok = max(worst_dual, worst_neg, crit) <= 1e-8 and dt < 300
    record_criterion(6, ok, f"duality {worst_dual:.1e}, eta negation {worst_neg:.1e}, "
                            f"critical sign flip {crit:.1e} (tol 1e-8), {dt:.0f}s")
    assert ok


def test_criterion_7_critical_clustering(unit):
    t0 = time.perf_counter()
    sizes = (64, 128, 256)
    crit = critical_cluster_diagnostic(unit, M, sizes, probes=(-0.6, 0.3), couplings=(2.5, 1.5))
    ctrl = cluster_counts(unit, M, sizes, (-0.6, 0.3, 0.0), couplings=(3.0, 0.0))
    dt = time.perf_counter() - t0
    ok = (crit.increasing(-0.6) and crit.bounded(0.3, 4)
          and all(ctrl.bounded(z, 4) for z in ctrl.probes) and dt < 600)
    record_criterion(7, ok, f"(2.5,1.5) counts at -0.6 {crit.counts[-0.6]}, at 0.3 "
                            f"{crit.counts[0.3]}; control (3,0) {ctrl.counts} "
                            f"(singular values < 0.05 of the order-zero scaled operator), {dt:.0f}s")
    assert ok


def test_criterion_8_two_loops(unit):
    t0 = time.perf_counter()
    far = arc_length_reparametrize(circle(1.0, (30.0, 0.0)))
    pair = LoopSystem((unit, far), ((-3.0, 0.0), (-3.0, 0.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        got = find_eigenvalues(pair, M, 64, ScanConfig(samples=400)).values
    want = np.repeat(_roots(unit, (-3.0, 0.0), 64), 2)
    doubled = set_distance(got, want)
    mixed = LoopSystem((unit, far), ((2.5, 1.5), (3.0, 0.0)))
    rep = critical_cluster_diagnostic(mixed, M, (64, 128, 256), probes=(-0.6, 0.0, 0.3))
    dt = time.perf_counter() - t0
    ok = doubled <= 1e-4 and rep.fires_at == (-0.6,) and dt < 600
    record_criterion(8, ok, f"doubled spectrum {doubled:.1e} (tol 1e-4); mixed pair fires at "
                            f"{rep.fires_at}, counts {rep.counts}; {dt:.0f}s")
    assert ok


def test_criterion_9_spectrum_command(tmp_path):
    cfg = tmp_path / "circle.json"
    cfg.write_text('{"mass": 1.0, "loops": [{"curve": {"type": "circle", "radius": 1.0}, '
                   '"eta": -3.0, "tau": 0.0}], "discretization": {"n": 128}, '
                   '"scan": {"samples": 400}}')
    outputs, times = [], []
    for _ in range(2):
        out = io.StringIO()
        t0 = time.perf_counter()
        code = cli.main(["spectrum", "--threads", "1", "--config", str(cfg)], out, io.StringIO())
        times.append(time.perf_counter() - t0)
        assert code == 0
        outputs.append(out.getvalue().encode())
    same = outputs[0] == outputs[1]
    ok = same and max(times) < 60
    record_criterion(9, ok, f"N=128, 400 samples, 1 thread: {times[0]:.1f}s / {times[1]:.1f}s "
                            f"(limit 60s), byte-identical {same}")
    assert ok
