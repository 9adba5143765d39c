"""Smooth closed curves given by finite Fourier series.

A :class:`RawCurve` is any trigonometric-polynomial loop ``u -> (x1(u), x2(u))``
on ``u in [0, 1)``.  :func:`arc_length_reparametrize` turns it into a
:class:`Curve`, positively oriented and parametrized proportionally to arc
length on the unit interval, so that ``|d gamma / ds| = length`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from shapely.geometry import LinearRing


class CurveError(ValueError):
    """Invalid curve data (vanishing derivative, self-intersection, ...)."""


class IntersectingLoopsError(CurveError):
    pass


_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RawCurve:
    """Loop ``x_c(u) = sum_k a_c[k] cos(2 pi k u) + b_c[k] sin(2 pi k u)``.

    ``cos1``/``sin1`` hold the coefficients of the first coordinate and
    ``cos2``/``sin2`` those of the second; ``sin*[0]`` is ignored.
    """

    cos1: np.ndarray
    sin1: np.ndarray
    cos2: np.ndarray
    sin2: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in
                  (self.cos1, self.sin1, self.cos2, self.sin2)]
        size = max(len(a) for a in arrays)
        padded = [np.pad(a, (0, size - len(a))) for a in arrays]
        for name, a in zip(("cos1", "sin1", "cos2", "sin2"), padded):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def harmonics(self) -> int:
        return len(self.cos1) - 1

    def evaluate(self, u, deriv: int = 0) -> np.ndarray:
        """Return the ``deriv``-th derivative in ``u``, shape ``u.shape + (2,)``."""
        u = np.asarray(u, dtype=float)
        k = np.arange(self.harmonics + 1)
        w = _TWO_PI * k
        phase = np.multiply.outer(u, w)
        c, s = np.cos(phase), np.sin(phase)
        # d^j/du^j of (cos, sin) cycles through (c, s) -> (-s, c) -> (-c, -s) -> (s, -c)
        basis = [(c, s), (-s, c), (-c, -s), (s, -c)][deriv % 4]
        scale = w ** deriv
        out = []
        for a, b in ((self.cos1, self.sin1), (self.cos2, self.sin2)):
            out.append(basis[0] @ (scale * a) + basis[1] @ (scale * b))
        return np.stack(out, axis=-1)

    def reversed(self) -> "RawCurve":
        """Same loop traversed the other way (``u -> -u``)."""
        return RawCurve(self.cos1, -self.sin1, self.cos2, -self.sin2)

    def translated(self, offset) -> "RawCurve":
        c1, c2 = self.cos1.copy(), self.cos2.copy()
        c1[0] += offset[0]
        c2[0] += offset[1]
        return RawCurve(c1, self.sin1, c2, self.sin2)


def circle(radius: float = 1.0, center=(0.0, 0.0)) -> RawCurve:
    return ellipse(radius, radius, center)


def ellipse(a: float, b: float, center=(0.0, 0.0)) -> RawCurve:
    return RawCurve([center[0], a], [0.0, 0.0], [center[1], 0.0], [0.0, b])


def star(radius: float, amplitude: float, petals: int, center=(0.0, 0.0)) -> RawCurve:
    """Polar curve ``r(theta) = radius * (1 + amplitude * cos(petals * theta))``."""
    p = int(petals)
    if p < 1:
        raise CurveError("star needs at least one petal")
    if not 0 <= amplitude < 1:
        raise CurveError("star amplitude must lie in [0, 1)")
    size = p + 2
    c1, s1, c2, s2 = (np.zeros(size) for _ in range(4))
    # r cos(theta) = R cos(theta) + (R A / 2) [cos((p+1) theta) + cos((p-1) theta)]
    # r sin(theta) = R sin(theta) + (R A / 2) [sin((p+1) theta) - sin((p-1) theta)]
    half = 0.5 * radius * amplitude
    c1[1] += radius
    s2[1] += radius
    c1[p + 1] += half
    s2[p + 1] += half
    if p == 1:
        c1[0] += half
    else:
        c1[p - 1] += half
        s2[p - 1] -= half
    c1[0] += center[0]
    c2[0] += center[1]
    return RawCurve(c1, s1, c2, s2)


def fourier_curve(cos1, sin1, cos2, sin2) -> RawCurve:
    return RawCurve(cos1, sin1, cos2, sin2)


def signed_area(points: np.ndarray) -> float:
    """Shoelace area of a closed polygon; positive for counterclockwise."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def winding_number(points: np.ndarray, target) -> float:
    """Winding number of the closed polygon ``points`` around ``target``."""
    d = points - np.asarray(target, dtype=float)
    ang = np.arctan2(d[:, 1], d[:, 0])
    steps = np.diff(np.append(ang, ang[0]))
    steps = (steps + np.pi) % _TWO_PI - np.pi
    return float(np.sum(steps) / _TWO_PI)


@dataclass(frozen=True)
class Curve:
    """Positively oriented loop in the unit arc-length parameter ``s``.

    ``point(s)`` returns ``gamma(s * length)``; derivatives are taken with
    respect to the unit parameter, so ``|point'(s)| == length``.
    """

    raw: RawCurve
    length: float
    n_quad: int
    # Fourier coefficients of the periodic part of the cumulative arc length
    _arc_coeffs: np.ndarray = field(repr=False)
    _freqs: np.ndarray = field(repr=False)

    def _arc(self, u):
        """Cumulative arc length divided by ``length`` and its u-derivative."""
        phase = np.exp(1j * _TWO_PI * np.multiply.outer(u, self._freqs))
        periodic = (phase @ self._arc_coeffs).real
        return u + periodic

    def parameter(self, s, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
        """Raw parameter ``u`` with ``arc(u) = s`` (Newton on the interpolant)."""
        s = np.asarray(s, dtype=float)
        u = s.copy()
        for _ in range(max_iter):
            speed = np.linalg.norm(self.raw.evaluate(u, 1), axis=-1) / self.length
            step = (self._arc(u) - s) / speed
            u = u - step
            if np.max(np.abs(step), initial=0.0) < tol:
                break
        return u

    def derivatives(self, s):
        """``(gamma, gamma', gamma'')`` at unit parameters ``s``, each ``(..., 2)``."""
        u = self.parameter(np.mod(s, 1.0))
        x0 = self.raw.evaluate(u, 0)
        x1 = self.raw.evaluate(u, 1)
        x2 = self.raw.evaluate(u, 2)
        speed = np.linalg.norm(x1, axis=-1)[..., None]
        dspeed = np.sum(x1 * x2, axis=-1)[..., None] / speed
        ell = self.length
        g1 = x1 * (ell / speed)
        g2 = (ell / speed) ** 2 * x2 - x1 * (ell ** 2 * dspeed / speed ** 3)
        return x0, g1, g2

    def point(self, s) -> np.ndarray:
        return self.derivatives(s)[0]

    def frame(self, s):
        """Point, unit tangent and unit outward normal ``(T2, -T1)`` at ``s``."""
        x, dx, _ = self.derivatives(s)
        t = dx / self.length
        nu = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return x, t, nu

    def nodes(self, n: int) -> dict:
        """Equispaced node data at ``s_j = j / n``.

        Keys: ``s``, ``x`` (points), ``tangent``, ``normal``, ``rho`` (points as
        complex numbers), ``drho``, ``d2rho`` (complex unit-parameter
        derivatives, ``|drho| == length``).
        """
        s = np.arange(n) / n
        x, dx, ddx = self.derivatives(s)
        t = dx / self.length
        return {
            "s": s,
            "x": x,
            "tangent": t,
            "normal": np.stack([t[:, 1], -t[:, 0]], axis=-1),
            "rho": x[:, 0] + 1j * x[:, 1],
            "drho": dx[:, 0] + 1j * dx[:, 1],
            "d2rho": ddx[:, 0] + 1j * ddx[:, 1],
        }

    @property
    def bounding_box(self):
        x = self.nodes(512)["x"]
        return (x[:, 0].min(), x[:, 1].min(), x[:, 0].max(), x[:, 1].max())

    def interior_point(self):
        """A point of the bounded component (checked by winding number)."""
        x, _, nu = self.frame(np.array([0.0]))
        poly = self.nodes(512)["x"]
        eps = 1e-3 * self.length
        for _ in range(30):
            cand = x[0] - eps * nu[0]
            if abs(winding_number(poly, cand) - 1.0) < 1e-6:
                return cand
            eps /= 2
        raise CurveError("could not locate an interior point")


def arc_length_reparametrize(raw: RawCurve, n_quad: int = 1024) -> Curve:
    """Build a positively oriented, arc-length parametrized :class:`Curve`.

    The length is the trapezoid mean of ``|x'(u)|`` over ``n_quad`` points;
    the cumulative arc length is integrated spectrally and inverted by
    Newton's method on demand.
    """
    if n_quad < 64 or n_quad & (n_quad - 1):
        raise ValueError("n_quad must be a power of two >= 64")
    if n_quad <= 4 * raw.harmonics:
        raise ValueError("n_quad too small for the number of harmonics")
    u = np.arange(n_quad) / n_quad
    pts = raw.evaluate(u)
    if signed_area(pts) < 0:
        raw = raw.reversed()
        pts = raw.evaluate(u)
    speed = np.linalg.norm(raw.evaluate(u, 1), axis=-1)
    if speed.min() < 1e-8 * speed.max():
        raise CurveError("curve derivative vanishes")
    dense = raw.evaluate(np.arange(4 * n_quad) / (4 * n_quad))
    if not LinearRing(dense).is_simple:
        raise CurveError("curve is self-intersecting")

    length = float(speed.mean())
    coeffs = np.fft.fft(speed / length - 1.0) / n_quad
    freqs = np.fft.fftfreq(n_quad, d=1.0 / n_quad)
    arc_coeffs = np.zeros(n_quad, dtype=complex)
    nz = freqs != 0
    arc_coeffs[nz] = coeffs[nz] / (1j * _TWO_PI * freqs[nz])
    # the periodic antiderivative should vanish at u = 0
    arc_coeffs[~nz] = -arc_coeffs[nz].sum()
    return Curve(raw, length, n_quad, arc_coeffs, freqs)


def min_distance(a: Curve, b: Curve, samples: int = 1024) -> float:
    """Minimal distance between two loops (dense sampling + local refinement)."""
    s = np.arange(samples) / samples
    pa, pb = a.point(s), b.point(s)
    d = cdist(pa, pb)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    best = float(d[i, j])
    if best == 0.0:
        return 0.0

    def objective(v):
        return float(np.linalg.norm(a.point(np.array([v[0]]))[0] - b.point(np.array([v[1]]))[0]))

    res = minimize(objective, x0=[s[i], s[j]], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
    return min(best, float(res.fun))


@dataclass(frozen=True)
class LoopSystem:
    """Ordered non-intersecting loops, each carrying its coupling pair."""

    curves: tuple
    couplings: tuple
    distances: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        curves = tuple(self.curves)
        couplings = tuple(self.couplings)
        if not curves or len(curves) != len(couplings):
            raise ValueError("need one coupling per loop and at least one loop")
        n = len(curves)
        dist = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = min_distance(curves[i], curves[j])
                if d < 1e-6 * max(curves[i].length, curves[j].length):
                    raise IntersectingLoopsError(f"loops {i} and {j} intersect")
                dist[i, j] = dist[j, i] = d
        dist.setflags(write=False)
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "distances", dist)

    def __len__(self):
        return len(self.curves)

    @property
    def min_length(self) -> float:
        return min(c.length for c in self.curves)
