"""Eigenvalues in the gap via the boundary operator ``B(z) = I + V C_z``.

``V`` applies ``eta_j s0 + tau_j s3`` nodewise on loop ``j``.  A point ``z`` of
the gap is an eigenvalue exactly when ``B(z)`` has a kernel, and the kernel
vectors are the boundary densities whose single-layer potentials are the
eigenfunctions.

For real ``z`` the discrete ``C_z`` is Hermitian, hence so is
``H(z) = V + V C_z V = B(z) V``.  Its eigenvalues cross zero at the roots,
which gives signed functions for root polishing and inertia counts for
bracketing, on top of the smallest-singular-value scan.
"""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bem import CzAssembler, single_layer
from .fourier import lambda_alpha
from .geometry import Curve, LoopSystem
from .kernel import S0, S3, GapError, sigma_dot

_REGIME_TOL = 1e-12


class RegimeError(ValueError):
    pass


class CouplingError(ValueError):
    pass


# --- couplings -----------------------------------------------------------------

@dataclass(frozen=True)
class CouplingPair:
    eta: float
    tau: float

    @property
    def d(self) -> float:
        return self.eta ** 2 - self.tau ** 2

    @property
    def regime(self) -> str:
        if self.eta == 0 and self.tau == 0:
            return "free"
        if abs(self.d - 4.0) < _REGIME_TOL:
            return "critical"
        if abs(self.d + 4.0) < _REGIME_TOL:
            return "confinement"
        return "noncritical"

    @property
    def kind(self) -> str:
        if self.eta == 0 and self.tau == 0:
            return "none"
        if self.tau == 0:
            return "electrostatic"
        if self.eta == 0:
            return "lorentz-scalar"
        return "mixed"

    @property
    def matrix(self) -> np.ndarray:
        """``eta s0 + tau s3``."""
        return self.eta * S0 + self.tau * S3


def classify(eta: float, tau: float) -> CouplingPair:
    if not (np.isfinite(eta) and np.isfinite(tau)):
        raise ValueError("couplings must be finite")
    return CouplingPair(float(eta), float(tau))


def _pair(c) -> CouplingPair:
    return c if isinstance(c, CouplingPair) else classify(*c)


def critical_essential_point(c, m: float) -> float:
    """Extra point ``-(tau/eta) m`` of the essential spectrum of a critical loop."""
    c = _pair(c)
    if c.regime != "critical":
        raise RegimeError(f"coupling {c.eta, c.tau} is {c.regime}, not critical")
    return -(c.tau / c.eta) * m


def dual_coupling(c) -> CouplingPair:
    """``(-4 eta/d, -4 tau/d)``; same point spectrum as ``c``."""
    c = _pair(c)
    if c.d == 0:
        raise CouplingError("duality needs |eta| != |tau|")
    return CouplingPair(-4.0 * c.eta / c.d, -4.0 * c.tau / c.d)


@dataclass(frozen=True)
class TransmissionData:
    R: np.ndarray
    M: np.ndarray | None
    # confinement only: T+ f lies in the range of plus_projector, T- f in minus_projector's
    plus_projector: np.ndarray | None = None
    minus_projector: np.ndarray | None = None


def transmission_matrix(c, nu) -> TransmissionData:
    """``R = (i/2)(sigma.nu)(eta s0 + tau s3)`` and ``M = (s0 - R)^{-1}(s0 + R)``.

    ``M`` maps the interior boundary value to the exterior one.  For
    ``eta^2 - tau^2 = -4`` it does not exist; the boundary condition then
    reads ``T+ f = R T+ f`` and ``T- f = -R T- f`` and decouples.
    """
    c = _pair(c)
    nu = np.asarray(nu, dtype=float)
    r = 0.5j * sigma_dot(nu) @ c.matrix
    if c.regime == "confinement":
        return TransmissionData(r, None, 0.5 * (S0 + r), 0.5 * (S0 - r))
    m = np.linalg.solve(S0 - r, S0 + r)
    closed = (4.0 / (4.0 + c.d)) * (S0 + r) @ (S0 + r)
    if not np.allclose(m, closed, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ArithmeticError("transmission matrix identity failed")
    return TransmissionData(r, m)


# --- Birman-Schwinger operator --------------------------------------------------

def _as_system(system, couplings=None) -> LoopSystem:
    if isinstance(system, LoopSystem):
        return system
    if isinstance(system, Curve):
        if couplings is None:
            raise ValueError("a bare curve needs a coupling")
        return LoopSystem((system,), (_pair(couplings),))
    raise TypeError("expected a LoopSystem or a Curve")


def coupling_vector(system: LoopSystem, n) -> np.ndarray:
    """Diagonal of ``V`` in the component-major node layout."""
    sizes = (n,) * len(system) if np.isscalar(n) else tuple(n)
    parts = []
    for c, k in zip(system.couplings, sizes):
        c = _pair(c)
        parts += [np.full(k, c.eta + c.tau), np.full(k, c.eta - c.tau)]
    return np.concatenate(parts)


def excluded_neighborhoods(system: LoopSystem, m: float, fraction: float = 0.02):
    """``(center, radius)`` around each critical loop's extra essential point."""
    out = []
    for c in system.couplings:
        c = _pair(c)
        if c.regime == "critical":
            out.append((critical_essential_point(c, m), fraction * 2 * abs(m)))
    return sorted(set(out))


@dataclass(frozen=True)
class BSOperator:
    z: float
    matrix: np.ndarray
    singular_values: np.ndarray  # descending

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])


def band_projector(n: int, band: int) -> np.ndarray:
    """Real symmetric ``n x n`` projection onto trigonometric modes ``|k| <= band``."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    col = np.fft.ifft((np.abs(k) <= band).astype(float)).real
    i = np.arange(n)
    return col[(i[:, None] - i[None, :]) % n]


def _block_diag(blocks) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out[pos:pos + k, pos:pos + k] = b
        pos += k
    return out


class BSAssembler:
    """Reusable ``B(z)`` builder for one loop system and discretization."""

    def __init__(self, system: LoopSystem, m: float, n):
        if m == 0:
            raise GapError("mass 0: the spectral gap is empty")
        self.system = system
        self.m = float(m)
        self.n = n
        self.cz = CzAssembler(system, n)
        self.v = coupling_vector(system, n)
        self.active = np.nonzero(self.v)[0]
        self.dim = self.cz.dim
        self.band = [max(1, k // 4) for k in self.cz.sizes]
        blocks = []
        for k, b in zip(self.cz.sizes, self.band):
            p = band_projector(k, b)
            blocks += [p, p]
        self._proj = _block_diag(blocks)

    def _filtered(self, z: float) -> np.ndarray:
        """``P C_z P`` with ``P`` the orthogonal projection onto frequencies ``|n| <= N/4``.

        Modes near ``N/2`` are aliased by the product rules; in the critical
        regime they produce spurious roots, so densities are kept band-limited
        at a quarter of the node count.
        """
        c = self.cz.assemble(self.m, z).matrix
        return self._proj @ c @ self._proj

    def matrix(self, z: float) -> np.ndarray:
        return np.eye(self.dim) + self.v[:, None] * self._filtered(z)

    def operator(self, z: float) -> BSOperator:
        b = self.matrix(z)
        return BSOperator(z, b, np.linalg.svd(b, compute_uv=False))

    def sigma_min(self, z: float) -> float:
        return float(np.linalg.svd(self.matrix(z), compute_uv=False)[-1])

    def hermitian_eigs(self, z: float) -> np.ndarray:
        """Ascending eigenvalues of ``V + V C_z V`` restricted to ``V != 0``."""
        a = self.active
        if a.size == 0:
            return np.zeros(0)
        c = self._filtered(z)[np.ix_(a, a)]
        v = self.v[a]
        h = np.diag(v) + v[:, None] * c * v[None, :]
        return np.linalg.eigvalsh(0.5 * (h + h.conj().T))

    def sample(self, z: float):
        """``(sigma_min(B), negative count of H)`` from a single assembly."""
        c = self._filtered(z)
        b = np.eye(self.dim) + self.v[:, None] * c
        smin = float(np.linalg.svd(b, compute_uv=False)[-1])
        a = self.active
        if a.size == 0:
            return smin, 0
        v = self.v[a]
        h = np.diag(v) + v[:, None] * c[np.ix_(a, a)] * v[None, :]
        neg = int(np.sum(np.linalg.eigvalsh(0.5 * (h + h.conj().T)) < 0))
        return smin, neg


def bs_matrix(system, m: float, z: float, n, couplings=None,
              critical_exclusion: float = 0.02, diagnostics: bool = False) -> BSOperator:
    system = _as_system(system, couplings)
    if not diagnostics:
        for c, r in excluded_neighborhoods(system, m, critical_exclusion):
            if abs(z - c) < r:
                raise RegimeError(f"z = {z} lies in the excluded neighborhood of {c}")
    return BSAssembler(system, m, n).operator(z)


# --- eigenvalue search ------------------------------------------------------------

@dataclass(frozen=True)
class ScanConfig:
    z_min: float | None = None
    z_max: float | None = None
    samples: int = 400
    tol_accept: float = 1e-6
    gap_margin: float = 1e-3
    critical_exclusion: float = 0.02
    rise_factor: float = 100.0
    multiplicity_floor: float = 1e-8
    threads: int | None = 1

    def grid(self, m: float) -> np.ndarray:
        am = abs(m)
        lo = -am + self.gap_margin if self.z_min is None else self.z_min
        hi = am - self.gap_margin if self.z_max is None else self.z_max
        if not (-am < lo < hi < am):
            raise GapError(f"scan range [{lo}, {hi}] is not inside the gap")
        return np.linspace(lo, hi, self.samples)


@dataclass(frozen=True)
class EigenvalueEntry:
    z: float
    sigma_min: float
    multiplicity: int
    densities: np.ndarray  # (2N_total, multiplicity), unit 2-norm columns
    accepted: bool = True


@dataclass(frozen=True)
class EigenvalueReport:
    eigenvalues: tuple
    scan: np.ndarray  # rows (z, sigma_min)
    excluded: tuple
    metadata: dict
    warnings: tuple = ()
    inertia: np.ndarray | None = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity, ascending."""
        return np.array([e.z for e in self.eigenvalues for _ in range(e.multiplicity)])

    @property
    def distinct(self) -> np.ndarray:
        return np.array([e.z for e in self.eigenvalues])


def curve_hash(system: LoopSystem) -> str:
    h = hashlib.sha256()
    for c in system.curves:
        for a in (c.raw.cos1, c.raw.sin1, c.raw.cos2, c.raw.sin2):
            h.update(np.ascontiguousarray(a, dtype=float).tobytes())
        h.update(str(c.n_quad).encode())
    return h.hexdigest()[:16]


def _map(fn, items, threads):
    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _sign_roots(bs: BSAssembler, a: float, b: float, xtol: float):
    """Roots in ``[a, b]`` of sorted eigenvalues of ``H`` that change sign there."""
    la, lb = bs.hermitian_eigs(a), bs.hermitian_eigs(b)
    if la.size == 0:
        return []
    roots = []
    for j in np.nonzero(np.sign(la) * np.sign(lb) < 0)[0]:
        f = lambda z, j=j: bs.hermitian_eigs(z)[j]
        roots.append(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    return roots


def _polish(bs: BSAssembler, z0: float, a: float, b: float, xtol: float) -> float:
    """Snap a singular-value minimum onto a sign change of ``H`` nearby, if any."""
    for h in (1e-10, 1e-8, 1e-6, 1e-4):
        lo, hi = max(a, z0 - h * abs(bs.m)), min(b, z0 + h * abs(bs.m))
        if hi <= lo:
            continue
        found = _sign_roots(bs, lo, hi, xtol)
        if found:
            return min(found, key=lambda r: abs(r - z0))
    return z0


@dataclass(frozen=True)
class ScanResult:
    z: np.ndarray
    sigma_min: np.ndarray
    negative: np.ndarray  # inertia of H at each z
    excluded: tuple
    step: float


def _scan(bs: BSAssembler, cfg: ScanConfig) -> ScanResult:
    excluded = tuple(excluded_neighborhoods(bs.system, bs.m, cfg.critical_exclusion))
    grid = cfg.grid(bs.m)
    step = float(grid[1] - grid[0]) if grid.size > 1 else abs(bs.m)
    # scan right up to the edges of the excluded neighborhoods
    edges = [e for c, r in excluded for e in (c - r, c + r) if grid[0] < e < grid[-1]]
    grid = np.union1d(grid, edges)
    keep = np.ones(grid.size, dtype=bool)
    for c, r in excluded:
        keep &= np.abs(grid - c) >= r * (1 - 1e-12)
    zs = grid[keep]
    samples = _map(bs.sample, list(zs), cfg.threads)
    smin = np.array([v for v, _ in samples])
    neg = np.array([q for _, q in samples], dtype=int)
    return ScanResult(zs, smin, neg, excluded, step)


def scan_sigma_min(system, m: float, n, config: ScanConfig | None = None,
                   couplings=None) -> ScanResult:
    """``sigma_min(B(z))`` on the scan grid, excluded neighborhoods removed."""
    system = _as_system(system, couplings)
    return _scan(BSAssembler(system, m, n), config or ScanConfig())


def _merge_clusters(bs: BSAssembler, entries, cfg: ScanConfig):
    """Join neighbouring roots whose near-null spaces overlap.

    Two simple roots closer than the singular-value floor resolves (e.g. the
    tunnelling split of a pair of far-apart identical loops) each see the
    other's small singular value; they are one cluster of multiplicity two.
    """
    out = []
    for e in entries:
        if out and out[-1].multiplicity > 1 and e.multiplicity > 1:
            prev = out[-1]
            overlap = np.linalg.svd(prev.densities.conj().T @ e.densities, compute_uv=False)
            if overlap[0] > 0.9:
                z = 0.5 * (prev.z + e.z)
                _, sv, vh = np.linalg.svd(bs.matrix(z))
                mult = max(prev.multiplicity, e.multiplicity,
                           int(np.sum(sv < max(10 * sv[-1], cfg.multiplicity_floor))))
                out[-1] = EigenvalueEntry(z, float(sv[-1]), mult, vh[-mult:][::-1].conj().T)
                continue
        out.append(e)
    return out


def find_eigenvalues(system, m: float, n, config: ScanConfig | None = None,
                     couplings=None) -> EigenvalueReport:
    """Locate gap eigenvalues by scanning ``sigma_min(B(z))``.

    Candidate brackets are local minima of the sampled ``sigma_min`` (grid
    ends included) and grid cells across which the inertia of ``H`` changes.
    Each root is located to about ``1e-10 |m|`` by bounded minimization and
    then snapped to the sign change of the crossing eigenvalue of ``H``.  A
    root is accepted when ``sigma_min < tol_accept`` and ``sigma_min`` at both
    bracket ends is at least ``rise_factor`` times larger.
    """
    cfg = config or ScanConfig()
    system = _as_system(system, couplings)
    bs = BSAssembler(system, m, n)
    sc = _scan(bs, cfg)
    zs, smin, neg, excluded, step = sc.z, sc.sigma_min, sc.negative, sc.excluded, sc.step

    # contiguous segments between excluded neighborhoods
    cut = np.nonzero(np.diff(zs) > 1.5 * step)[0]
    segments = np.split(np.arange(zs.size), cut + 1)
    brackets = []
    for seg in segments:
        if seg.size == 0:
            continue
        for pos, i in enumerate(seg):
            left = seg[pos - 1] if pos > 0 else None
            right = seg[pos + 1] if pos + 1 < seg.size else None
            if (left is None or smin[i] <= smin[left]) and (right is None or smin[i] <= smin[right]):
                lo = left if left is not None else i
                hi = right if right is not None else i
                if hi > lo:
                    brackets.append((lo, hi))
        for i, j in zip(seg[:-1], seg[1:]):
            if neg[i] != neg[j] and not any(lo <= i and j <= hi for lo, hi in brackets):
                brackets.append((i, j))

    xtol = 1e-10 * abs(m)
    found = []
    for lo, hi in sorted(set(brackets)):
        a, b = zs[lo], zs[hi]
        cands = _sign_roots(bs, a, b, 1e-3 * xtol)
        if not cands:
            res = minimize_scalar(bs.sigma_min, bounds=(a, b), method="bounded",
                                  options={"xatol": xtol})
            cands = [_polish(bs, float(res.x), a, b, 1e-3 * xtol)]
        ends = min(smin[lo], smin[hi])
        for z in cands:
            s = bs.sigma_min(z)
            if s < cfg.tol_accept and ends >= cfg.rise_factor * s:
                found.append(z)

    found.sort()
    merged = []
    for z in found:
        if merged and abs(z - merged[-1][-1]) <= 10 * xtol:
            merged[-1].append(z)
        else:
            merged.append([z])

    entries = []
    for group in merged:
        z = float(np.mean(group))
        b = bs.matrix(z)
        _, sv, vh = np.linalg.svd(b)
        s = float(sv[-1])
        thresh = max(10 * s, cfg.multiplicity_floor)
        mult = max(int(np.sum(sv < thresh)), len(group))
        dens = vh[-mult:][::-1].conj().T
        entries.append(EigenvalueEntry(z, s, mult, dens))
    entries = _merge_clusters(bs, entries, cfg)

    notes = []
    for e1, e2 in zip(entries[:-1], entries[1:]):
        if e2.z - e1.z < 3 * step:
            msg = (f"grid too coarse: roots {e1.z:.12g} and {e2.z:.12g} are closer "
                   f"than three grid steps; rerun with more samples")
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    drop = int(neg[0] - neg[-1]) if neg.size else 0
    total = sum(e.multiplicity for e in entries)
    if drop != total and not excluded:
        notes.append(f"inertia change {drop} differs from accepted root count {total}")

    meta = {
        "n": n,
        "m": float(m),
        "curve_hash": curve_hash(system),
        "couplings": [(_pair(c).eta, _pair(c).tau) for c in system.couplings],
        "samples": int(cfg.samples),
        "grid_step": float(step),
    }
    scan = np.column_stack([zs, smin])
    scan.setflags(write=False)
    return EigenvalueReport(tuple(entries), scan, excluded, meta, tuple(notes),
                            np.column_stack([zs, neg]))


# --- critical clustering ----------------------------------------------------------

@dataclass(frozen=True)
class ClusterReport:
    probes: tuple
    sizes: tuple
    counts: dict  # probe -> tuple of counts, one per size
    threshold: float
    critical_points: tuple

    def increasing(self, z: float) -> bool:
        c = self.counts[z]
        return all(b > a for a, b in zip(c[:-1], c[1:]))

    def bounded(self, z: float, bound: int = 4) -> bool:
        return max(self.counts[z]) <= bound

    @property
    def fires_at(self) -> tuple:
        return tuple(z for z in self.probes if self.increasing(z))


def lambda_matrix(n: int, c0: float = 1.0) -> np.ndarray:
    """Nodal matrix of the multiplier ``(c0^2 + |k|)^(1/2)`` on ``n`` equispaced nodes."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    col = np.fft.ifft(lambda_alpha(1.0, c0).symbol(k)).real
    i = np.arange(n)
    return col[(i[:, None] - i[None, :]) % n]


def scaled_operator(bs: BSAssembler, z: float, c0: float = 1.0) -> np.ndarray:
    """``Lambda (V^{-1} + P C_z P) Lambda``, the order-zero form of the boundary condition.

    Needs ``|eta| != |tau|`` on every loop.
    """
    if np.any(bs.v == 0):
        raise CouplingError("the scaled operator needs |eta| != |tau| on every loop")
    lam = _block_diag([lambda_matrix(k, c0) for k in bs.cz.sizes for _ in range(2)])
    return lam @ (np.diag(1.0 / bs.v) + bs._filtered(z)) @ lam


def cluster_counts(system, m: float, n_list, probes, threshold: float = 0.05,
                   couplings=None, operator: str = "scaled") -> ClusterReport:
    """Number of singular values below ``threshold`` per probe and size.

    ``operator="scaled"`` counts on ``Lambda (V^{-1} + C_z) Lambda``, whose
    essential spectrum meets 0 only at a critical point; ``"bs"`` counts on
    ``B(z)`` itself, where the critical regime makes singular values decay
    like ``1/n`` at every ``z``.
    """
    system = _as_system(system, couplings)
    if operator not in ("scaled", "bs"):
        raise ValueError(f"unknown operator {operator!r}")
    crit = tuple(c for c, _ in excluded_neighborhoods(system, m))
    counts = {float(z): [] for z in probes}
    for n in n_list:
        bs = BSAssembler(system, m, n)
        for z in counts:
            mat = scaled_operator(bs, z) if operator == "scaled" else bs.matrix(z)
            sv = np.linalg.svd(mat, compute_uv=False)
            counts[z].append(int(np.sum(sv < threshold)))
    return ClusterReport(tuple(counts), tuple(n_list),
                         {z: tuple(c) for z, c in counts.items()}, threshold, crit)


def critical_cluster_diagnostic(system, m: float, n_list=(64, 128, 256), probes=None,
                                threshold: float = 0.05, couplings=None,
                                operator: str = "scaled") -> ClusterReport:
    """Singular-value clustering as ``N`` grows.

    Counts grow without bound only at the extra essential point of a
    critical loop and stay bounded elsewhere in the gap.  ``probes``
    defaults to the critical points plus the control ``0.3 |m|``.
    """
    system = _as_system(system, couplings)
    crit = [c for c, _ in excluded_neighborhoods(system, m)]
    if not crit:
        raise RegimeError("no critical loop in the system")
    if probes is None:
        probes = sorted(set(crit) | {0.3 * abs(m)})
    if list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list must be strictly increasing")
    return cluster_counts(system, m, n_list, probes, threshold, operator=operator)


# --- eigenfunctions -------------------------------------------------------------

def eigenfunction(system, m: float, entry: EigenvalueEntry, targets, n=None,
                  couplings=None, which: int = 0, oversample: int = 1) -> np.ndarray:
    """Single-layer potential of a nullspace density, normalized on ``targets``.

    Returns ``(n_targets, 2)`` complex values with ``sum |u|^2 = 1`` (zero
    density gives a zero field).
    """
    system = _as_system(system, couplings)
    if not getattr(entry, "accepted", False):
        raise ValueError("entry is not an accepted eigenvalue")
    dens = entry.densities[:, which]
    u = single_layer(system, m, entry.z, dens, targets, n=n, oversample=oversample)
    norm = np.sqrt(np.sum(np.abs(u) ** 2))
    return u / norm if norm > 0 else u
