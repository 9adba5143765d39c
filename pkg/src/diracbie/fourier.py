"""Fourier calculus on the unit torus.

Samples live on the equispaced grid ``t_j = j / N``.  Coefficients follow
``f = sum_n fhat(n) e_n`` with ``e_n(t) = exp(2 pi i n t)``; the Nyquist mode
``n = -N/2`` is carried by numpy's FFT layout but excluded from the
multiplier classes below (it is set to zero, which keeps real symbols
Hermitian on the grid).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def _check_power_of_two(n: int, minimum: int = 8) -> None:
    if n < minimum or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= {minimum}, got {n}")


@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self):
        _check_power_of_two(self.n)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def frequencies(self) -> np.ndarray:
        """Integer frequencies in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    def mode(self, k: int) -> np.ndarray:
        return np.exp(2j * np.pi * k * self.nodes)


def coeffs(samples) -> np.ndarray:
    """``fhat(n) = (1/N) sum_j f(t_j) exp(-2 pi i n t_j)`` in FFT order."""
    u = np.asarray(samples)
    _check_power_of_two(u.shape[0])
    return np.fft.fft(u, axis=0) / u.shape[0]


def inverse(c) -> np.ndarray:
    c = np.asarray(c)
    _check_power_of_two(c.shape[0])
    return np.fft.ifft(c, axis=0) * c.shape[0]


def coefficient(samples, n: int) -> complex:
    """Single coefficient ``fhat(n)`` for ``|n| < N/2``."""
    c = coeffs(samples)
    if abs(n) >= c.shape[0] // 2:
        raise ValueError("frequency outside the represented band")
    return c[n % c.shape[0]]


@dataclass(frozen=True)
class FourierMultiplier:
    """t-independent symbol ``h(n)`` with declared growth order."""

    symbol: Callable[[np.ndarray], np.ndarray]
    order: float = 0.0

    def values(self, n: int) -> np.ndarray:
        freqs = np.fft.fftfreq(n, d=1.0 / n)
        h = np.asarray(self.symbol(freqs), dtype=complex) * np.ones(n)
        h[n // 2] = 0.0
        return h

    def check_order(self, n: int, constant: float | None = None) -> float:
        """Largest ``|h(k)| / max(|k|,1)^order`` over the band; compared to ``constant`` if given."""
        freqs = np.fft.fftfreq(n, d=1.0 / n)
        h = self.values(n)
        ratio = np.abs(h) / np.maximum(np.abs(freqs), 1.0) ** self.order
        worst = float(ratio.max())
        if constant is not None and worst > constant:
            raise ValueError(f"symbol exceeds order {self.order} bound: {worst} > {constant}")
        return worst

    def compose(self, other: "FourierMultiplier") -> "FourierMultiplier":
        a, b = self.symbol, other.symbol
        return FourierMultiplier(lambda n: a(n) * b(n), self.order + other.order)

    def __call__(self, u):
        return apply_multiplier(self, u)


def apply_multiplier(m: FourierMultiplier, u) -> np.ndarray:
    u = np.asarray(u)
    h = m.values(u.shape[0])
    if u.ndim > 1:
        h = h.reshape((-1,) + (1,) * (u.ndim - 1))
    return inverse(h * coeffs(u))


def lambda_alpha(alpha: float, c0: float = 1.0) -> FourierMultiplier:
    """Symbol ``(c0^2 + |n|)^(alpha/2)``."""
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    return FourierMultiplier(lambda n: (c0 ** 2 + np.abs(n)) ** (alpha / 2.0), alpha / 2.0)


HILBERT = FourierMultiplier(np.sign, 0.0)


def hilbert_transform(u) -> np.ndarray:
    """Multiplier ``sign(n)``: ``i PV int cot(pi (t - s)) u(s) ds``."""
    return apply_multiplier(HILBERT, u)


def sobolev_norm(u, s: float, c_norm: str = "floor") -> float:
    """``(sum n_^(2s) |uhat(n)|^2)^(1/2)`` over ``|n| < N/2``.

    ``c_norm="floor"`` uses ``n_ = max(|n|, 1)``; ``"shifted"`` uses the
    equivalent weight ``1 + |n|``.
    """
    u = np.asarray(u)
    n = u.shape[0]
    c = coeffs(u)
    freqs = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    if c_norm == "floor":
        w = np.maximum(freqs, 1.0)
    elif c_norm == "shifted":
        w = 1.0 + freqs
    else:
        raise ValueError(f"unknown norm convention {c_norm!r}")
    keep = freqs < n / 2
    return float(np.sqrt(np.sum(w[keep] ** (2 * s) * np.abs(c[keep]) ** 2)))
