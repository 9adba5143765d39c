"""Command-line front end.

A problem is described by a JSON file::

    {
      "mass": 1.0,
      "loops": [{"curve": {"type": "circle", "radius": 1.0, "center": [0, 0]},
                 "eta": -3.0, "tau": 0.0}],
      "discretization": {"n": 128},
      "scan": {"samples": 400},
      "output": {"format": "csv"}
    }

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import json.decoder
import json.scanner
import os
import sys
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import validation
from .bem import GUARD_FRACTION, curve_distance
from .geometry import (CurveError, LoopSystem, arc_length_reparametrize, circle, ellipse,
                       fourier_curve, star)
from .kernel import GapError
from .spectral import (ScanConfig, classify, critical_essential_point, eigenfunction,
                       find_eigenvalues, scan_sigma_min, transmission_matrix)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

CURVE_FIELDS = {
    "circle": {"radius": 1.0, "center": [0.0, 0.0]},
    "ellipse": {"a": None, "b": None, "center": [0.0, 0.0]},
    "star": {"radius": None, "amplitude": None, "petals": None, "center": [0.0, 0.0]},
    "fourier": {"cos1": None, "sin1": None, "cos2": None, "sin2": None},
}
SCAN_FIELDS = ("z_min", "z_max", "samples", "tol_accept", "gap_margin", "critical_exclusion")


class ConfigError(ValueError):
    """Invalid problem configuration; the message carries ``source:line:``."""


class NumericalError(RuntimeError):
    pass


# --- JSON with line numbers -------------------------------------------------------

class _LineDecoder(json.JSONDecoder):
    """Decoder that remembers the line of every object key.

    Uses the pure-Python scanner so that object parsing can be intercepted.
    """

    def __init__(self, text: str):
        super().__init__(object_pairs_hook=dict)
        self.text = text
        self.lines: dict = {}  # id(obj) -> {key: line, None: line of "{"}
        self.keep: list = []  # hold parsed objects so ids stay unique

        def parse_object(s_and_end, strict, scan_once, object_hook, pairs_hook,
                         memo=None):
            s, start = s_and_end
            obj, end = json.decoder.JSONObject(s_and_end, strict, scan_once, object_hook,
                                               pairs_hook, memo if memo is not None else {})
            where = {None: s.count("\n", 0, start) + 1}
            pos = start
            for key in obj:
                hit = s.find(json.dumps(key), pos, end)
                if hit >= 0:
                    where[key] = s.count("\n", 0, hit) + 1
                    pos = hit + 1
            self.lines[id(obj)] = where
            self.keep.append(obj)
            return obj, end

        self.parse_object = parse_object
        self.scan_once = json.scanner.py_make_scanner(self)


class _Located:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def error(self, obj, key, message) -> ConfigError:
        where = self.lines.get(id(obj), {})
        line = where.get(key, where.get(None, 1))
        return ConfigError(f"{self.source}:{line}: {message}")


def _real(loc, obj, key, default=None, required=False):
    if key not in obj:
        if required:
            raise loc.error(obj, None, f"missing field {key!r}")
        return default
    v = obj[key]
    if v is None and not required:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise loc.error(obj, key, f"{key!r} must be a finite number, got {v!r}")
    return float(v)


def _int(loc, obj, key, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise loc.error(obj, key, f"{key!r} must be an integer, got {v!r}")
    return v


def _vector(loc, obj, key, default, size=None):
    if key not in obj:
        return list(default) if default is not None else None
    v = obj[key]
    ok = isinstance(v, list) and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x) for x in v)
    if not ok or (size is not None and len(v) != size) or not v:
        want = f"a list of {size} numbers" if size else "a non-empty list of numbers"
        raise loc.error(obj, key, f"{key!r} must be {want}")
    return [float(x) for x in v]


# --- problem configuration ----------------------------------------------------------

@dataclass(frozen=True)
class LoopSpec:
    curve: dict
    eta: float
    tau: float


@dataclass(frozen=True)
class ProblemConfig:
    mass: float
    loops: tuple
    n: int = 128
    scan: dict = field(default_factory=dict)
    output_format: str = "csv"
    output_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "loops": [{"curve": dict(lp.curve), "eta": lp.eta, "tau": lp.tau}
                      for lp in self.loops],
            "discretization": {"n": self.n},
            "scan": dict(self.scan),
            "output": {"format": self.output_format, "path": self.output_path},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def scan_config(self, threads=1) -> ScanConfig:
        return ScanConfig(**self.scan, threads=threads)

    def system(self) -> LoopSystem:
        curves = [arc_length_reparametrize(build_curve(lp.curve)) for lp in self.loops]
        return LoopSystem(tuple(curves), tuple((lp.eta, lp.tau) for lp in self.loops))


def build_curve(spec: dict):
    kind = spec["type"]
    if kind == "circle":
        return circle(spec["radius"], tuple(spec["center"]))
    if kind == "ellipse":
        return ellipse(spec["a"], spec["b"], tuple(spec["center"]))
    if kind == "star":
        return star(spec["radius"], spec["amplitude"], spec["petals"], tuple(spec["center"]))
    return fourier_curve(spec["cos1"], spec["sin1"], spec["cos2"], spec["sin2"])


def _parse_curve(loc, obj) -> dict:
    if not isinstance(obj, dict):
        raise loc.error(obj, None, "'curve' must be an object")
    kind = obj.get("type")
    if kind not in CURVE_FIELDS:
        raise loc.error(obj, "type" if "type" in obj else None,
                        f"curve type must be one of {sorted(CURVE_FIELDS)}, got {kind!r}")
    fields = CURVE_FIELDS[kind]
    for key in obj:
        if key != "type" and key not in fields:
            raise loc.error(obj, key, f"unknown field {key!r} for a {kind}")
    out = {"type": kind}
    for key, default in fields.items():
        if key == "center":
            out[key] = _vector(loc, obj, key, default, size=2)
        elif kind == "fourier":
            out[key] = _vector(loc, obj, key, None)
            if out[key] is None:
                raise loc.error(obj, None, f"missing field {key!r}")
        elif key == "petals":
            out[key] = _int(loc, obj, key)
            if out[key] is None:
                raise loc.error(obj, None, "missing field 'petals'")
            if out[key] < 1:
                raise loc.error(obj, key, "'petals' must be >= 1")
        else:
            out[key] = _real(loc, obj, key, default, required=default is None)
            if key in ("radius", "a", "b") and out[key] <= 0:
                raise loc.error(obj, key, f"{key!r} must be positive")
    if kind == "star" and not 0 <= out["amplitude"] < 1:
        raise loc.error(obj, "amplitude", "'amplitude' must lie in [0, 1)")
    return out


def config_from_obj(data, loc: _Located) -> ProblemConfig:
    if not isinstance(data, dict):
        raise loc.error(data, None, "configuration must be a JSON object")
    known = {"mass", "loops", "discretization", "scan", "output"}
    for key in data:
        if key not in known:
            raise loc.error(data, key, f"unknown field {key!r}")
    m = _real(loc, data, "mass", required=True)
    if m == 0:
        raise loc.error(data, "mass", "mass must be nonzero (the gap is empty for m = 0)")
    loops = data.get("loops")
    if not isinstance(loops, list) or not loops:
        raise loc.error(data, "loops" if "loops" in data else None,
                        "'loops' must be a non-empty list")
    specs = []
    for lp in loops:
        if not isinstance(lp, dict):
            raise loc.error(data, "loops", "each loop must be an object")
        for key in lp:
            if key not in ("curve", "eta", "tau"):
                raise loc.error(lp, key, f"unknown loop field {key!r}")
        if "curve" not in lp:
            raise loc.error(lp, None, "missing field 'curve'")
        specs.append(LoopSpec(_parse_curve(loc, lp["curve"]),
                              _real(loc, lp, "eta", required=True),
                              _real(loc, lp, "tau", required=True)))

    disc = data.get("discretization", {})
    if not isinstance(disc, dict):
        raise loc.error(data, "discretization", "'discretization' must be an object")
    n = _int(loc, disc, "n", 128)
    if n < 16 or n & (n - 1):
        raise loc.error(disc, "n", f"'n' must be a power of two >= 16, got {n}")

    scan = data.get("scan", {})
    if not isinstance(scan, dict):
        raise loc.error(data, "scan", "'scan' must be an object")
    for key in scan:
        if key not in SCAN_FIELDS:
            raise loc.error(scan, key, f"unknown scan field {key!r}")
    sc = {}
    for key in SCAN_FIELDS:
        if key in scan:
            sc[key] = _int(loc, scan, key) if key == "samples" else _real(loc, scan, key)
    if sc.get("samples", 400) < 2:
        raise loc.error(scan, "samples", "'samples' must be >= 2")
    for key in ("tol_accept", "critical_exclusion"):
        if key in sc and sc[key] is not None and sc[key] <= 0:
            raise loc.error(scan, key, f"{key!r} must be positive")
    margin = sc.get("gap_margin", ScanConfig.gap_margin)
    if margin is None or not 0 <= margin < abs(m):
        raise loc.error(scan, "gap_margin", "'gap_margin' must lie in [0, |m|)")
    lo_ok, hi_ok = -abs(m) + margin, abs(m) - margin
    lo, hi = sc.get("z_min"), sc.get("z_max")
    for key, v in (("z_min", lo), ("z_max", hi)):
        if v is not None and not lo_ok <= v <= hi_ok:
            raise loc.error(scan, key, f"{key!r} = {v} is outside [{lo_ok}, {hi_ok}]"
                            " (gap minus margin)")
    if (lo if lo is not None else lo_ok) >= (hi if hi is not None else hi_ok):
        raise loc.error(scan, None, "empty scan range: z_min must be below z_max")

    out = data.get("output", {})
    if not isinstance(out, dict):
        raise loc.error(data, "output", "'output' must be an object")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise loc.error(out, "format", f"output format must be 'csv' or 'json', got {fmt!r}")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise loc.error(out, "path", "output path must be a string or null")
    return ProblemConfig(m, tuple(specs), n, sc, fmt, path)


def parse_config(text: str, source: str = "<config>") -> ProblemConfig:
    dec = _LineDecoder(text)
    try:
        data = dec.decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    return config_from_obj(data, _Located(source, dec.lines))


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc.strerror}") from None
    return parse_config(text, path)


# --- output helpers -------------------------------------------------------------------

def fmt(x) -> str:
    return f"{float(x):.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, path: str | None, stdout):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


# --- commands ------------------------------------------------------------------------

def cmd_classify(cfg: ProblemConfig, fmt_: str = "csv") -> str:
    items = []
    for j, lp in enumerate(cfg.loops):
        c = classify(lp.eta, lp.tau)
        item = {"loop": j, "eta": c.eta, "tau": c.tau, "d": c.d, "regime": c.regime,
                "kind": c.kind}
        if c.regime == "critical":
            item["essential_point"] = critical_essential_point(c, cfg.mass)
            item["note"] = "extra essential spectrum point in the gap"
        elif c.regime == "free":
            item["note"] = "operator equals free Dirac"
        elif c.regime == "confinement":
            r = transmission_matrix(c, (1.0, 0.0)).R
            item["R"] = [[[z.real, z.imag] for z in row] for row in r]
            item["note"] = "decoupled: A = A+ ⊕ A- (interior and exterior problems)"
        items.append(item)
    if fmt_ == "json":
        return json.dumps({"mass": cfg.mass, "loops": items}, indent=2) + "\n"
    lines = []
    for it in items:
        line = (f"loop {it['loop']}: eta={fmt(it['eta'])} tau={fmt(it['tau'])} "
                f"d={fmt(it['d'])} regime={it['regime']} kind={it['kind']}")
        if "essential_point" in it:
            line += f" essential_point={fmt(it['essential_point'])}"
        lines.append(line)
        if "R" in it:
            r = transmission_matrix(classify(it["eta"], it["tau"]), (1.0, 0.0)).R
            lines.append(f"  R(nu=(1,0)) = {np.array2string(r, precision=6)}".replace("\n", ""))
        if "note" in it:
            lines.append(f"  note: {it['note']}")
    return "\n".join(lines) + "\n"


def cmd_scan(cfg: ProblemConfig, threads: int = 1) -> str:
    res = scan_sigma_min(cfg.system(), cfg.mass, cfg.n, cfg.scan_config(threads))
    return csv_text(["z", "sigma_min"], [(fmt(z), fmt(s)) for z, s in zip(res.z, res.sigma_min)])


def _spectrum(cfg, threads, scan=None):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        rep = find_eigenvalues(cfg.system(), cfg.mass, cfg.n, scan or cfg.scan_config(threads))
    notes = [str(w.message) for w in caught]
    return rep, notes


def cmd_spectrum(cfg: ProblemConfig, threads: int = 1, fmt_: str = "csv") -> str:
    rep, notes = _spectrum(cfg, threads)
    if fmt_ == "json":
        out = {
            "mass": cfg.mass,
            "n": cfg.n,
            "eigenvalues": [{
                "index": i, "z": e.z, "sigma_min": e.sigma_min,
                "multiplicity": e.multiplicity,
                "densities": [[[v.real, v.imag] for v in col] for col in e.densities.T],
            } for i, e in enumerate(rep.eigenvalues)],
            "excluded": [{"center": c, "radius": r} for c, r in rep.excluded],
            "warnings": list(rep.warnings) + [n for n in notes if n not in rep.warnings],
            "metadata": rep.metadata,
        }
        return json.dumps(out, indent=2, default=_json_default) + "\n"
    rows = [(i, fmt(e.z), fmt(e.sigma_min), e.multiplicity)
            for i, e in enumerate(rep.eigenvalues)]
    return csv_text(["index", "z", "sigma_min", "multiplicity"], rows)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def default_bbox(system: LoopSystem, pad: float = 0.5):
    pts = np.concatenate([c.point(np.linspace(0, 1, 256, endpoint=False)) for c in system.curves])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    return (lo[0] - pad * span[0], hi[0] + pad * span[0],
            lo[1] - pad * span[1], hi[1] + pad * span[1])


class NoSuchEigenvalue(LookupError):
    pass


def locate_eigenvalue(cfg: ProblemConfig, z: float, threads: int = 1, tol: float = 1e-8):
    """Accepted root within ``tol`` of ``z``, found by a local scan."""
    am = abs(cfg.mass)
    margin = cfg.scan.get("gap_margin") or ScanConfig.gap_margin
    half = 0.02 * am
    lo, hi = max(z - half, -am + margin), min(z + half, am - margin)
    if not lo < z < hi:
        raise NoSuchEigenvalue(f"z = {z} is not inside the scanned gap")
    scan = replace(cfg.scan_config(threads), z_min=lo, z_max=hi, samples=41)
    rep, _ = _spectrum(cfg, threads, scan)
    best = min(rep.eigenvalues, key=lambda e: abs(e.z - z), default=None)
    if best is None or abs(best.z - z) > tol:
        near = "none found" if best is None else f"nearest accepted root {best.z:.12g}"
        raise NoSuchEigenvalue(f"no accepted eigenvalue within {tol:g} of {z} ({near})")
    return rep, best


def cmd_eigenfunction(cfg: ProblemConfig, z: float, nx: int, ny: int, bbox=None,
                      threads: int = 1) -> str:
    rep, entry = locate_eigenvalue(cfg, z, threads)
    system = cfg.system()
    x0, x1, y0, y1 = bbox if bbox is not None else default_bbox(system)
    xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    guard = GUARD_FRACTION * system.min_length
    masked = np.zeros(len(pts), dtype=bool)
    for c in system.curves:
        masked |= curve_distance(c, pts) < guard
    u = np.full((len(pts), 2), np.nan, dtype=complex)
    if np.any(~masked):
        u[~masked] = eigenfunction(system, cfg.mass, entry, pts[~masked], n=cfg.n)
    rows = []
    for p, v, mk in zip(pts, u, masked):
        vals = ["nan"] * 4 if mk else [fmt(v[0].real), fmt(v[0].imag),
                                       fmt(v[1].real), fmt(v[1].imag)]
        rows.append([fmt(p[0]), fmt(p[1]), *vals, int(mk)])
    return csv_text(["x1", "x2", "re_u1", "im_u1", "re_u2", "im_u2", "masked"], rows)


def cmd_verify(level: str = "quick", threads: int = 1):
    table = validation.run_all(level, threads=threads)
    return table.to_csv(), table.passed


def cmd_sweep(cfg: ProblemConfig, eta_range, tau_range, steps, threads: int = 1) -> str:
    etas = np.linspace(eta_range[0], eta_range[1], steps[0])
    taus = np.linspace(tau_range[0], tau_range[1], steps[1])
    rows = []
    for eta in etas:
        for tau in taus:
            c = classify(eta, tau)
            loops = tuple(replace(lp, eta=c.eta, tau=c.tau) for lp in cfg.loops)
            rep, _ = _spectrum(replace(cfg, loops=loops), threads)
            zs = ";".join(fmt(v) for v in rep.values)
            rows.append([fmt(eta), fmt(tau), c.regime, len(rep.values), zs])
    return csv_text(["eta", "tau", "regime", "n_eigenvalues", "z_list"], rows)


# --- argument parsing ------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON problem configuration")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for the z scan (default: CPU count)")
    common.add_argument("--output", metavar="PATH", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    p = argparse.ArgumentParser(prog="diracbie", parents=[common],
                                description="Gap eigenvalues of Dirac operators with "
                                            "delta-shell interactions on closed curves.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="coupling regime of each loop")
    sub.add_parser("scan", parents=[common], help="sigma_min of B(z) on the scan grid")
    sub.add_parser("spectrum", parents=[common], help="eigenvalues in the gap")
    ef = sub.add_parser("eigenfunction", parents=[common], help="eigenfunction on a grid")
    ef.add_argument("--z", type=float, required=True, help="accepted eigenvalue")
    ef.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"), default=(41, 41))
    ef.add_argument("--bbox", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    vf = sub.add_parser("verify", parents=[common], help="built-in residual suites")
    vf.add_argument("--level", choices=("quick", "full"), default="quick")
    sw = sub.add_parser("sweep", parents=[common], help="eigenvalue counts over couplings")
    sw.add_argument("--eta-range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    sw.add_argument("--tau-range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    sw.add_argument("--steps", type=int, nargs="+", required=True,
                    help="grid size per axis (one value for both)")
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    threads = max(1, args.threads)
    try:
        if args.command == "verify":
            text, ok = cmd_verify(args.level, threads)
            _emit(text, args.output, stdout)
            if not ok:
                stderr.write("verification failed\n")
            return EXIT_OK if ok else EXIT_VERIFY
        if not args.config:
            raise ConfigError(f"{args.command} needs --config PATH")
        cfg = load_config(args.config)
        fmt_ = args.format or cfg.output_format
        path = args.output or cfg.output_path
        try:
            cfg.system()
        except CurveError as exc:
            raise ConfigError(f"{args.config}: invalid geometry: {exc}") from None
        if args.command == "classify":
            text = cmd_classify(cfg, fmt_)
        elif args.command == "scan":
            text = cmd_scan(cfg, threads)
        elif args.command == "spectrum":
            text = cmd_spectrum(cfg, threads, fmt_)
        elif args.command == "eigenfunction":
            nx, ny = args.grid
            if nx < 1 or ny < 1:
                raise ConfigError("--grid needs positive sizes")
            text = cmd_eigenfunction(cfg, args.z, nx, ny, args.bbox, threads)
        else:
            steps = args.steps * 2 if len(args.steps) == 1 else args.steps
            if len(steps) != 2 or min(steps) < 1:
                raise ConfigError("--steps takes one or two positive integers")
            if not all(np.isfinite(args.eta_range)) or not all(np.isfinite(args.tau_range)):
                raise ConfigError("sweep ranges must be finite")
            text = cmd_sweep(cfg, args.eta_range, args.tau_range, steps, threads)
        _emit(text, path, stdout)
        return EXIT_OK
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except NoSuchEigenvalue as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (GapError, ArithmeticError, np.linalg.LinAlgError, NumericalError) as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
