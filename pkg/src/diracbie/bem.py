"""Nyström discretization of the boundary operator ``C_z``.

Densities on a loop are sampled at ``t_j = j / N`` and stored component-major
(first spinor component at all nodes, then the second).  Several loops are
concatenated in order.

On a loop of length ``l`` the diagonal block is assembled as::

    l * [ (i/2 pi) [[0, w_ij/xi_ij], [w_ij/conj(xi_ij), 0]]
          + R_ij F1_ij + F2_ij / N ]

where ``w_ij = 2/N`` on odd index offsets (the cot rule times the smooth
factor ``tan(pi(t-s)) / (pi xi)``; where the cot weight vanishes the product
is set to zero), ``R`` is the product rule for ``log|2 sin pi(t-s)|`` and
``F1``, ``F2`` come from :mod:`diracbie.kernel`.  With real ``z`` the block is
exactly Hermitian.  Blocks between distinct loops use the plain trapezoid
rule on ``phi_z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Curve, LoopSystem
from .kernel import SpectralParams, green_kernel, sigma_dot, split_arrays


class GuardError(ValueError):
    """Evaluation point too close to a loop for the trapezoid rule."""


GUARD_FRACTION = 0.02


# --- quadrature tables -------------------------------------------------------

@dataclass(frozen=True)
class QuadratureTables:
    n: int
    log: np.ndarray  # rule for log|2 sin pi(t - s)|
    cot: np.ndarray  # rule for PV cot(pi(t - s))

    @property
    def log_sin(self) -> np.ndarray:
        """Rule for ``log|sin pi(t - s)|``."""
        return self.log - np.log(2.0) / self.n

    @property
    def odd_mask(self) -> np.ndarray:
        i = np.arange(self.n)
        return ((i[:, None] - i[None, :]) % 2).astype(bool)


def _circulant(first_col: np.ndarray) -> np.ndarray:
    n = len(first_col)
    i = np.arange(n)
    return first_col[(i[:, None] - i[None, :]) % n]


@lru_cache(maxsize=16)
def build_quadrature(n: int) -> QuadratureTables:
    if n < 16 or n & (n - 1):
        raise ValueError("N must be a power of two >= 16")
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    sym = np.zeros(n)
    nz = freqs != 0
    sym[nz] = -0.5 / np.abs(freqs[nz])
    sym[n // 2] = -0.5 / n  # Nyquist mode at half weight
    log_rule = _circulant(np.fft.ifft(sym).real)
    k = np.arange(n)
    col = np.zeros(n)
    odd = k % 2 == 1
    col[odd] = (2.0 / n) / np.tan(np.pi * k[odd] / n)
    cot_rule = _circulant(col)
    for a in (log_rule, cot_rule):
        a.setflags(write=False)
    return QuadratureTables(n, log_rule, cot_rule)


# --- assembly ----------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryOperatorMatrix:
    z: float
    m: float
    matrix: np.ndarray
    offsets: tuple  # start index of each loop's 2N_k slice
    sizes: tuple  # N_k per loop
    weights: np.ndarray  # quadrature weight l_k / N_k per unknown

    def block(self, j: int, k: int) -> np.ndarray:
        a, b = self.offsets[j], self.offsets[k]
        return self.matrix[a:a + 2 * self.sizes[j], b:b + 2 * self.sizes[k]]

    def adjoint_defect(self) -> float:
        """``max|W C - (W C)^H| / max|W C|`` with the quadrature weights ``W``."""
        wc = self.weights[:, None] * self.matrix
        return float(np.abs(wc - wc.conj().T).max() / np.abs(wc).max())


def _to_component_major(blocks: np.ndarray) -> np.ndarray:
    """``(Ni, Nj, 2, 2)`` node blocks -> ``(2 Ni, 2 Nj)`` matrix."""
    ni, nj = blocks.shape[:2]
    return blocks.transpose(2, 0, 3, 1).reshape(2 * ni, 2 * nj)


class _Loop:
    def __init__(self, curve: Curve, n: int):
        self.curve = curve
        self.n = n
        self.nodes = curve.nodes(n)
        self.tables = build_quadrature(n)
        rho = self.nodes["rho"]
        s = self.nodes["s"]
        self.rho_t = np.broadcast_to(rho[:, None], (n, n))
        self.rho_s = np.broadcast_to(rho[None, :], (n, n))
        self.dt = s[:, None] - s[None, :]
        odd = self.tables.odd_mask
        xi = self.rho_t - self.rho_s
        cauchy = np.zeros((n, n, 2, 2), dtype=complex)
        cauchy[odd, 0, 1] = (2.0 / n) / xi[odd]
        cauchy[odd, 1, 0] = (2.0 / n) / np.conj(xi[odd])
        self.cauchy = (1j / (2 * np.pi)) * cauchy


class CzAssembler:
    """Geometry-dependent data for repeated assembly of ``C_z`` at many ``z``.

    Immutable after construction; :meth:`assemble` allocates fresh arrays and
    may be called concurrently.
    """

    def __init__(self, loops, n):
        if isinstance(loops, LoopSystem):
            curves = loops.curves
        elif isinstance(loops, Curve):
            curves = (loops,)
        else:
            curves = tuple(loops)
        sizes = (n,) * len(curves) if np.isscalar(n) else tuple(n)
        if len(sizes) != len(curves):
            raise ValueError("need one node count per loop")
        self.loops = tuple(_Loop(c, int(k)) for c, k in zip(curves, sizes))
        self.sizes = tuple(int(k) for k in sizes)
        offs = np.concatenate([[0], np.cumsum([2 * k for k in self.sizes])])
        self.offsets = tuple(int(o) for o in offs[:-1])
        self.dim = int(offs[-1])
        self.weights = np.concatenate(
            [np.full(2 * lp.n, lp.curve.length / lp.n) for lp in self.loops])

    def diagonal_block(self, p: SpectralParams, lp: _Loop) -> np.ndarray:
        _, f1, f2 = split_arrays(p, lp.rho_t, lp.rho_s, lp.dt, lp.curve.length)
        blocks = lp.cauchy + lp.tables.log[..., None, None] * f1 + f2 / lp.n
        return lp.curve.length * _to_component_major(blocks)

    @staticmethod
    def coupling_block(p: SpectralParams, target: _Loop, source: _Loop) -> np.ndarray:
        x = target.nodes["x"][:, None, :] - source.nodes["x"][None, :, :]
        blocks = green_kernel(p, x) * (source.curve.length / source.n)
        return _to_component_major(blocks)

    def assemble(self, m: float, z: float) -> BoundaryOperatorMatrix:
        p = SpectralParams(m, z)
        mat = np.empty((self.dim, self.dim), dtype=complex)
        for j, lj in enumerate(self.loops):
            a = self.offsets[j]
            for k, lk in enumerate(self.loops):
                b = self.offsets[k]
                blk = self.diagonal_block(p, lj) if j == k else self.coupling_block(p, lj, lk)
                mat[a:a + 2 * lj.n, b:b + 2 * lk.n] = blk
        mat.setflags(write=False)
        return BoundaryOperatorMatrix(z, m, mat, self.offsets, self.sizes, self.weights)


def assemble_cz(system, m: float, z: float, n) -> BoundaryOperatorMatrix:
    """Dense ``C_z`` for a :class:`LoopSystem`, a single :class:`Curve`, or a list of curves."""
    return CzAssembler(system, n).assemble(m, z)


def assemble_cauchy(curve: Curve, n: int):
    """Nyström matrices of the Cauchy transform ``C_Sigma`` and its dual ``C_Sigma'``."""
    nd = curve.nodes(n)
    rho, drho = nd["rho"], nd["drho"]
    odd = build_quadrature(n).odd_mask
    xi = rho[:, None] - rho[None, :]
    c = np.zeros((n, n), dtype=complex)
    cd = np.zeros((n, n), dtype=complex)
    c[odd] = ((1j / np.pi) * (2.0 / n) * np.broadcast_to(drho[None, :], (n, n)))[odd] / xi[odd]
    cd[odd] = ((1j / np.pi) * (2.0 / n) * np.broadcast_to(np.conj(drho)[:, None], (n, n)))[odd] \
        / np.conj(xi[odd])
    return c, cd


# --- off-curve evaluation -----------------------------------------------------

def _split_density(density, sizes):
    density = np.asarray(density, dtype=complex).ravel()
    if density.size != 2 * sum(sizes):
        raise ValueError("density length does not match node counts")
    out, pos = [], 0
    for n in sizes:
        out.append(density[pos:pos + 2 * n].reshape(2, n))
        pos += 2 * n
    return out


def _upsample(samples: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation of ``(..., N)`` samples onto ``factor * N`` nodes."""
    n = samples.shape[-1]
    c = np.fft.fft(samples, axis=-1)
    big = np.zeros(samples.shape[:-1] + (factor * n,), dtype=complex)
    h = n // 2
    big[..., :h] = c[..., :h]
    big[..., -h + 1:] = c[..., -h + 1:]
    # split the Nyquist coefficient symmetrically
    big[..., h] = 0.5 * c[..., h]
    big[..., -h] = 0.5 * c[..., h]
    return np.fft.ifft(big, axis=-1) * factor


def curve_distance(curve: Curve, targets, samples: int = 2048) -> np.ndarray:
    """Distance from each target to the loop (dense sample plus local Newton)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    s = np.arange(samples) / samples
    pts = curve.point(s)
    d2 = ((targets[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    best = s[np.argmin(d2, axis=1)]
    for _ in range(8):
        x, dx, ddx = curve.derivatives(best)
        diff = x - targets
        g = (diff * dx).sum(-1)
        h = (dx * dx).sum(-1) + (diff * ddx).sum(-1)
        step = np.where(h > 0, g / np.where(h > 0, h, 1.0), 0.0)
        best = best - np.clip(step, -0.5 / samples, 0.5 / samples)
    return np.linalg.norm(curve.point(best) - targets, axis=-1)


def single_layer(system, m: float, z: float, density, targets, n=None,
                 oversample: int = 1, guard: bool = True) -> np.ndarray:
    """``Phi_z phi(x) = int phi_z(x - y) phi(y) ds(y)`` at off-curve targets.

    ``density`` is a component-major nodal vector as used by
    :func:`assemble_cz`.  With ``oversample = q`` the density is
    trigonometrically interpolated onto ``q N`` nodes and the admissible
    distance ``0.02 * min loop length`` is relaxed to ``0.02 * min length / q``.
    Returns ``(n_targets, 2)`` complex values.
    """
    curves = system.curves if isinstance(system, LoopSystem) else (
        (system,) if isinstance(system, Curve) else tuple(system))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if n is None:
        total = np.asarray(density).size // 2
        if total % len(curves):
            raise ValueError("cannot infer node counts; pass n")
        n = total // len(curves)
    sizes = (n,) * len(curves) if np.isscalar(n) else tuple(n)
    parts = _split_density(density, sizes)
    p = SpectralParams(m, z)
    if guard:
        limit = GUARD_FRACTION * min(c.length for c in curves) / oversample
        for c in curves:
            dist = curve_distance(c, targets)
            if np.any(dist < limit):
                raise GuardError(f"target within {dist.min():.3g} of a loop; guard is {limit:.3g}")
    out = np.zeros((len(targets), 2), dtype=complex)
    if not np.any([np.any(q) for q in parts]):
        return out
    for c, k, dens in zip(curves, sizes, parts):
        fine = k * oversample
        y = c.nodes(fine)["x"]
        vals = _upsample(dens, oversample) if oversample > 1 else dens
        for start in range(0, len(targets), 256):
            tgt = targets[start:start + 256]
            ker = green_kernel(p, tgt[:, None, :] - y[None, :, :])
            out[start:start + 256] += (c.length / fine) * np.einsum("tjab,bj->ta", ker, vals)
    return out


# --- jump relation ------------------------------------------------------------

@dataclass(frozen=True)
class PlemeljReport:
    distances: tuple
    average_residual: float
    jump_residual: float
    inner: np.ndarray
    outer: np.ndarray


def extrapolate_to_zero(h, values):
    """Neville table: value at ``h = 0`` of the polynomial through ``(h_i, values_i)``."""
    h = list(h)
    p = [np.asarray(v) for v in values]
    for level in range(1, len(h)):
        p = [(h[i] * p[i + 1] - h[i + level] * p[i]) / (h[i] - h[i + level])
             for i in range(len(p) - 1)]
    return p[0]


def plemelj_check(curve: Curve, m: float, z: float, density, distances,
                  n: int | None = None, oversample: int = 8,
                  n_targets: int = 64, order: int | None = None) -> PlemeljReport:
    """Compare one-sided limits of ``Phi_z phi`` with ``C_z phi`` and the jump.

    The field is evaluated at ``gamma(s) -/+ d nu(s)`` (inside / outside) at
    ``n_targets`` equispaced nodes, and ``d -> 0`` is extrapolated by
    repeated Richardson elimination over the ``order + 1`` smallest distances
    (all of them by default; ``order=1`` is the plain linear step).
    Residuals are relative to the max norm of ``C_z phi`` and of ``phi``.
    """
    density = np.asarray(density, dtype=complex).ravel()
    if n is None:
        n = density.size // 2
    if n % n_targets:
        raise ValueError("n_targets must divide n")
    d = sorted(float(v) for v in distances)
    if len(d) < 2:
        raise ValueError("need at least two distances")
    stride = n // n_targets
    nd = curve.nodes(n)
    idx = np.arange(0, n, stride)
    base, nu = nd["x"][idx], nd["normal"][idx]

    use = d if order is None else d[:order + 1]

    def limit(sign):
        f = [single_layer(curve, m, z, density, base + sign * dd * nu, n=n,
                          oversample=oversample) for dd in use]
        return extrapolate_to_zero(use, f)

    inner = limit(-1.0)
    outer = limit(+1.0)
    cz = assemble_cz(curve, m, z, n).matrix @ density
    cz = np.stack([cz[:n][idx], cz[n:][idx]], axis=-1)
    phi = np.stack([density[:n][idx], density[n:][idx]], axis=-1)
    jump = -1j * np.einsum("tab,tb->ta", sigma_dot(nu), phi)
    scale_c = max(np.abs(cz).max(), 1e-300)
    scale_p = max(np.abs(phi).max(), 1e-300)
    avg = 0.5 * (inner + outer)
    avg_res = 0.0 if not density.any() else float(np.abs(avg - cz).max() / scale_c)
    jump_res = 0.0 if not density.any() else float(np.abs(inner - outer - jump).max() / scale_p)
    return PlemeljReport(tuple(d), avg_res, jump_res, inner, outer)
