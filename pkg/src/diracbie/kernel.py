"""Free Dirac Green kernel in the spectral gap and its singular split.

For ``x != 0`` and ``k = sqrt(m^2 - z^2)``::

    phi_z(x) = i k/(2 pi) K1(k|x|) sigma.x/|x| + 1/(2 pi) K0(k|x|) (m s3 + z s0)

Writing ``K1(t) = 1/t + log(t) I1(t) + R1(t)`` and
``K0(t) = -log(t) I0(t) + R0(t)`` gives, on a curve with nodes ``rho(t)``,

    phi_z = cauchy + F1 * log|2 sin pi(t - s)| + F2

with the Cauchy block ``(i/2 pi) [[0, 1/xi], [1/conj(xi), 0]]``,
``xi = rho(t) - rho(s)``, and smooth ``F1``, ``F2``.  On the diagonal
``F1 = -(m s3 + z s0)/(2 pi)`` and

    F2 = -(m s3 + z s0)/(2 pi) * (log(k l / (2 pi)) + euler_gamma - log 2)

where ``l`` is the curve length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

EULER_GAMMA = float(np.euler_gamma)
LOG2 = float(np.log(2.0))

S0 = np.eye(2, dtype=complex)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (S0, S1, S2, S3)
for _m in PAULI:
    _m.setflags(write=False)

_SERIES_CUTOFF = 2.0
_SERIES_TERMS = 30


class GapError(ValueError):
    """Spectral point outside the open gap, or empty gap (m = 0)."""


class SingularPointError(ValueError):
    pass


def sigma_dot(x) -> np.ndarray:
    """``sigma . x`` for an array of points ``(..., 2)`` -> ``(..., 2, 2)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 1] = x[..., 0] - 1j * x[..., 1]
    out[..., 1, 0] = x[..., 0] + 1j * x[..., 1]
    return out


@dataclass(frozen=True)
class SpectralParams:
    m: float
    z: float

    def __post_init__(self):
        if self.m == 0:
            raise GapError("mass 0: the spectral gap is empty")
        if not abs(self.z) < abs(self.m):
            raise GapError(f"z = {self.z} is outside the gap (-{abs(self.m)}, {abs(self.m)})")

    @property
    def k(self) -> float:
        return float(np.sqrt((self.m - self.z) * (self.m + self.z)))

    @property
    def mass_matrix(self) -> np.ndarray:
        """``m s3 + z s0``."""
        return self.m * S3 + self.z * S0


# --- ascending series --------------------------------------------------------

_K = np.arange(_SERIES_TERMS)
_FACT = special.factorial(_K)
_I0_COEF = 1.0 / _FACT ** 2
_I1_COEF = 0.5 / (_FACT * special.factorial(_K + 1))  # I1(t)/t
_HARM = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _SERIES_TERMS))])
_R0_COEF = _HARM * _I0_COEF
# -(1/4)[psi(k+1) + psi(k+2)] / (k!(k+1)!),  psi(k+1) = H_k - gamma
_R1_COEF = -0.5 * (_HARM + np.append(_HARM[1:], _HARM[-1] + 1.0 / _SERIES_TERMS)
                   - 2 * EULER_GAMMA) * _I1_COEF


def _poly(coef, q):
    out = np.zeros_like(q)
    for c in coef[::-1]:
        out = out * q + c
    return out


def series_parts(t):
    """``(I0, I1/t, R0, R1/t)`` by ascending series; accurate for ``t <= 2``."""
    t = np.asarray(t, dtype=float)
    q = 0.25 * t * t
    i0 = _poly(_I0_COEF, q)
    i1_t = _poly(_I1_COEF, q)
    r0 = (LOG2 - EULER_GAMMA) * i0 + _poly(_R0_COEF, q)
    r1_t = -LOG2 * i1_t + _poly(_R1_COEF, q)
    return i0, i1_t, r0, r1_t


def bessel_i(order: int, x) -> np.ndarray:
    """Modified Bessel ``I_0`` or ``I_1`` (series below 2, Cephes above)."""
    x = np.asarray(x, dtype=float)
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    small = np.abs(x) <= _SERIES_CUTOFF
    out = (special.i0 if order == 0 else special.i1)(x)
    if np.any(small):
        i0, i1_t, _, _ = series_parts(x[small])
        out = np.asarray(out, dtype=float)
        out[small] = i0 if order == 0 else i1_t * x[small]
    return out[()] if out.ndim == 0 else out


def bessel_k(order: int, x) -> np.ndarray:
    """Modified Bessel ``K_0`` or ``K_1`` for ``x > 0``.

    Ascending series for ``x <= 2``; above that, the exponentially scaled
    Chebyshev expansions of scipy.special (``k0e``/``k1e``).
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("bessel_k needs x > 0")
    out = np.empty_like(x)
    small = x <= _SERIES_CUTOFF
    xs = x[small]
    if xs.size:
        i0, i1_t, r0, r1_t = series_parts(xs)
        lx = np.log(xs)
        if order == 0:
            out[small] = -lx * i0 + r0
        else:
            out[small] = 1.0 / xs + xs * (lx * i1_t + r1_t)
    xl = x[~small]
    if xl.size:
        scaled = special.k0e(xl) if order == 0 else special.k1e(xl)
        with np.errstate(under="ignore"):
            out[~small] = scaled * np.exp(-xl)
    return out[()] if out.ndim == 0 else out


# --- kernel -----------------------------------------------------------------

def green_kernel(p: SpectralParams, x) -> np.ndarray:
    """``phi_z(x)`` for points ``(..., 2)``; returns ``(..., 2, 2)``."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r == 0):
        raise SingularPointError("green kernel is singular at x = 0")
    k = p.k
    kr = k * r
    a = np.asarray((1j * k / (2 * np.pi)) * bessel_k(1, kr) / r)
    b = np.asarray(bessel_k(0, kr) / (2 * np.pi))
    return a[..., None, None] * sigma_dot(x) + b[..., None, None] * p.mass_matrix


def _cauchy_block(xi):
    out = np.zeros(np.shape(xi) + (2, 2), dtype=complex)
    out[..., 0, 1] = 1.0 / xi
    out[..., 1, 0] = 1.0 / np.conj(xi)
    return (1j / (2 * np.pi)) * out


def _f1(p: SpectralParams, x, r):
    """``F1`` at displacements ``x``; ``I1(kr)/r`` via ``k * (I1(t)/t)``."""
    k = p.k
    t = k * r
    small = t <= _SERIES_CUTOFF
    i0 = np.empty_like(t)
    i1_r = np.empty_like(t)
    if np.any(small):
        s0, s1, _, _ = series_parts(t[small])
        i0[small] = s0
        i1_r[small] = k * s1
    if np.any(~small):
        tl = t[~small]
        i0[~small] = special.i0(tl)
        i1_r[~small] = special.i1(tl) / r[~small]
    return ((1j * k / (2 * np.pi)) * i1_r)[..., None, None] * sigma_dot(x) \
        - (i0 / (2 * np.pi))[..., None, None] * p.mass_matrix


def _f2_series(p: SpectralParams, x, r, log_ratio, f1):
    """``F2 = F1 (log r - log|2 sin|) + f2`` with ``f2`` from the series (``kr <= 2``)."""
    k = p.k
    t = k * r
    i0, i1_t, r0, r1_t = series_parts(t)
    lk = np.log(k)
    vec = (1j * k * k / (2 * np.pi)) * (lk * i1_t + r1_t)
    sca = (-lk * i0 + r0) / (2 * np.pi)
    f2 = vec[..., None, None] * sigma_dot(x) + sca[..., None, None] * p.mass_matrix
    return f1 * log_ratio[..., None, None] + f2


def diagonal_limits(p: SpectralParams, length: float):
    """``(F1(t,t), F2(t,t))`` on a curve of the given length."""
    mm = p.mass_matrix / (2 * np.pi)
    f1 = -mm
    f2 = -mm * (np.log(p.k * length / (2 * np.pi)) + EULER_GAMMA - LOG2)
    return f1, f2


_DIAG_EPS = 1e-6


def split_arrays(p: SpectralParams, rho_t, rho_s, dt, length):
    """Vectorized split for node pairs.

    ``rho_t``, ``rho_s`` are complex points, ``dt = t - s`` the unit-parameter
    offsets (same shape).  Returns ``(xi, F1, F2)`` where ``xi = rho_t - rho_s``;
    pairs with ``|dt| mod 1 < 1e-6`` get the diagonal limits and ``xi = nan``.
    """
    xi = np.asarray(rho_t - rho_s, dtype=complex)
    dt = np.asarray(dt, dtype=float)
    w = np.abs(dt - np.round(dt))
    diag = w < _DIAG_EPS
    shape = xi.shape
    f1 = np.empty(shape + (2, 2), dtype=complex)
    f2 = np.empty(shape + (2, 2), dtype=complex)
    d1, d2 = diagonal_limits(p, length)
    f1[diag] = d1
    f2[diag] = d2
    off = ~diag
    if np.any(off):
        xo = xi[off]
        x = np.stack([xo.real, xo.imag], axis=-1)
        r = np.abs(xo)
        lsin = np.log(np.abs(2 * np.sin(np.pi * dt[off])))
        g1 = _f1(p, x, r)
        f1[off] = g1
        t = p.k * r
        near = t <= _SERIES_CUTOFF
        g2 = np.empty_like(g1)
        if np.any(near):
            g2[near] = _f2_series(p, x[near], r[near], np.log(r[near]) - lsin[near], g1[near])
        if np.any(~near):
            direct = green_kernel(p, x[~near]) - _cauchy_block(xo[~near])
            g2[~near] = direct - g1[~near] * lsin[~near][..., None, None]
        f2[off] = g2
    xi = np.where(diag, np.nan, xi)
    return xi, f1, f2


@dataclass(frozen=True)
class KernelSplit:
    """Split of ``phi_z`` at one node pair ``(t, s)``."""

    xi: complex
    log_factor: float
    F1: np.ndarray
    F2: np.ndarray
    diagonal: bool

    cauchy_weight = 1j / (2 * np.pi)

    @property
    def cauchy_factors(self):
        """``(1/xi, 1/conj(xi))``, placed anti-diagonally with weight i/(2 pi)."""
        return 1.0 / self.xi, 1.0 / np.conj(self.xi)

    @property
    def cauchy_part(self) -> np.ndarray:
        if self.diagonal:
            raise SingularPointError("Cauchy part is singular on the diagonal")
        return _cauchy_block(self.xi)

    def reassemble(self) -> np.ndarray:
        return self.cauchy_part + self.F1 * self.log_factor + self.F2


def kernel_split(p: SpectralParams, curve, t: float, s: float) -> KernelSplit:
    pts = curve.point(np.array([t, s]))
    rho = pts[:, 0] + 1j * pts[:, 1]
    dt = t - s
    xi, f1, f2 = split_arrays(p, rho[:1], rho[1:], np.array([dt]), curve.length)
    diag = bool(np.isnan(xi[0]))
    lf = np.nan if diag else float(np.log(abs(2 * np.sin(np.pi * dt))))
    return KernelSplit(complex(xi[0]) if not diag else complex(np.nan), lf, f1[0], f2[0], diag)
