"""File formats, background normalisation, line cuts and presets.

Formats
-------
trace CSV      header ``f_d_hz,re_s21,im_s21``, one row per frequency.
real map CSV   first row ``<x_unit>\\<y_unit>`` then the y axis; every further
               row is an x value followed by its cells.
complex map    two real-map files ``<stem>.re.csv`` and ``<stem>.im.csv``.
sidecar        ``<stem>.meta.json`` with schema ``cqedsim-meta/1``.

Floats are written with 17 significant digits so a read returns the exact
doubles that were written.  Writers hold an exclusive lock on
a hidden ``.<stem>.lock`` and replace files atomically.
"""
from __future__ import annotations

import contextlib
import csv
import fcntl
import hashlib
import io
import json
import os
import tempfile
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .chargeq import LeverArms, detuning_from_voltages, voltage_from_detuning
from .errors import ConfigError, InsufficientSpanError, OutOfRangeError, ZeroBackgroundError
from .records import ComplexTrace, Map2D

META_SCHEMA = "cqedsim-meta/1"
TRACE_HEADER = ("f_d_hz", "re_s21", "im_s21")
FMT = "%.17g"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "__dataclass_fields__"):
        return {k: getattr(o, k) for k in o.__dataclass_fields__}
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def content_hash(obj):
    """sha256 of the canonical JSON form of ``obj`` (inputs, configs)."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def bytes_hash(data: bytes):
    return hashlib.sha256(data).hexdigest()


@contextlib.contextmanager
def _locked(stem: Path):
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_name("." + stem.name + ".lock"), "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _stem(path):
    p = Path(path)
    for suf in (".re.csv", ".im.csv", ".csv", ".meta.json"):
        if p.name.endswith(suf):
            return p.with_name(p.name[: -len(suf)])
    return p


def sidecar_path(path):
    s = _stem(path)
    return s.with_name(s.name + ".meta.json")


def _trace_bytes(t: ComplexTrace):
    v = np.asarray(t.values, dtype=complex)
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for f, z in zip(t.freqs, v):
        buf.write(f"{FMT % f},{FMT % z.real},{FMT % z.imag}\n")
    return buf.getvalue().encode()


def _map_bytes(x, y, cells, x_unit, y_unit):
    buf = io.StringIO()
    buf.write(f"{x_unit}\\{y_unit}," + ",".join(FMT % v for v in y) + "\n")
    for xi, row in zip(x, cells):
        buf.write(FMT % xi + "," + ",".join(FMT % c for c in row) + "\n")
    return buf.getvalue().encode()


def _sidecar(kind, data_hash, meta, input_hash=None, **extra):
    doc = {"schema": META_SCHEMA, "kind": kind, "data_hash": data_hash,
           "input_hash": input_hash, "meta": meta}
    doc.update(extra)
    return (json.dumps(doc, sort_keys=True, indent=1, default=_jsonable) + "\n").encode()


def write_trace(path, trace: ComplexTrace, input_hash=None):
    """Write ``<stem>.csv`` plus sidecar; returns the CSV path."""
    stem = _stem(path)
    csv_path = stem.with_name(stem.name + ".csv")
    data = _trace_bytes(trace)
    with _locked(stem):
        _atomic_write(csv_path, data)
        _atomic_write(sidecar_path(stem), _sidecar("trace", bytes_hash(data), trace.meta, input_hash))
    return csv_path


def write_map(path, m: Map2D, input_hash=None):
    """Write a map (one CSV if real, ``.re``/``.im`` pair if complex) plus sidecar.

    Returns the list of data files written.
    """
    stem = _stem(path)
    if m.is_complex:
        parts = {stem.with_name(stem.name + ".re.csv"): m.cells.real,
                 stem.with_name(stem.name + ".im.csv"): m.cells.imag}
    else:
        parts = {stem.with_name(stem.name + ".csv"): np.asarray(m.cells, dtype=float)}
    blobs = {p: _map_bytes(m.x_axis, m.y_axis, c, m.x_unit, m.y_unit) for p, c in parts.items()}
    h = hashlib.sha256()
    for p in blobs:  # real part first, as _data_files lists them
        h.update(blobs[p])
    with _locked(stem):
        for p, b in blobs.items():
            _atomic_write(p, b)
        _atomic_write(sidecar_path(stem), _sidecar("map", h.hexdigest(), m.meta, input_hash,
                                                   complex=bool(m.is_complex),
                                                   x_unit=m.x_unit, y_unit=m.y_unit))
    return list(blobs)


def read_sidecar(path):
    p = sidecar_path(path)
    if not p.exists():
        return None
    doc = json.loads(p.read_text())
    if doc.get("schema") != META_SCHEMA:
        raise ConfigError([f"{p}: unknown sidecar schema {doc.get('schema')!r}"])
    return doc


def _data_files(path):
    stem = _stem(path)
    plain = stem.with_name(stem.name + ".csv")
    if plain.exists():
        return [plain]
    pair = [stem.with_name(stem.name + ".re.csv"), stem.with_name(stem.name + ".im.csv")]
    if all(p.exists() for p in pair):
        return pair
    raise FileNotFoundError(f"no data file for {path}")


def verify(path):
    """True when the data files still match the sidecar hash (None without sidecar)."""
    doc = read_sidecar(path)
    if doc is None:
        return None
    h = hashlib.sha256()
    for p in _data_files(path):
        h.update(p.read_bytes())
    return h.hexdigest() == doc.get("data_hash")


def read_trace(path) -> ComplexTrace:
    path = Path(path)
    if not path.exists():
        path = _data_files(path)[0]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != TRACE_HEADER:
        raise ConfigError([f"{path}: expected header {','.join(TRACE_HEADER)}"])
    arr = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float).reshape(-1, 3)
    doc = read_sidecar(path)
    return ComplexTrace(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], dict(doc["meta"]) if doc else {})


def _read_real_map(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    head = rows[0]
    units = head[0].split("\\")
    if len(units) != 2:
        raise ConfigError([f"{path}: first cell must be '<x_unit>\\<y_unit>'"])
    y = np.array([float(c) for c in head[1:]])
    body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, y.size + 1)
    return body[:, 0], y, body[:, 1:], units[0], units[1]


def read_map(path) -> Map2D:
    files = _data_files(path)
    x, y, cells, xu, yu = _read_real_map(files[0])
    if len(files) == 2:
        x2, y2, im, _, _ = _read_real_map(files[1])
        if not (np.array_equal(x, x2) and np.array_equal(y, y2)):
            raise ConfigError([f"{path}: .re/.im axes disagree"])
        cells = cells + 1j * im
    doc = read_sidecar(path)
    return Map2D(x, y, cells, xu, yu, dict(doc["meta"]) if doc else {})


def read_dataset(path):
    """A trace or a map, whichever the file holds."""
    doc = read_sidecar(path)
    if doc is not None:
        return read_trace(path) if doc["kind"] == "trace" else read_map(path)
    files = _data_files(path)
    with open(files[0]) as fh:
        first = fh.readline().strip()
    return read_trace(files[0]) if first == ",".join(TRACE_HEADER) else read_map(path)


# --- normalisation and cuts -------------------------------------------------

def _background_on(background: ComplexTrace, f):
    bf = background.freqs
    if f.min() < bf[0] or f.max() > bf[-1]:
        raise InsufficientSpanError(f"background covers [{bf[0]:.6g}, {bf[-1]:.6g}] Hz, "
                                    f"raw needs [{f.min():.6g}, {f.max():.6g}] Hz")
    bv = np.asarray(background.values, dtype=complex)
    if np.any(np.abs(bv) == 0):
        raise ZeroBackgroundError(f"background vanishes at {bf[np.abs(bv) == 0][0]:.9g} Hz")
    return np.interp(f, bf, bv.real) + 1j * np.interp(f, bf, bv.imag)


def normalize_background(raw, background: ComplexTrace):
    """Divide out a background trace (linearly interpolated onto ``raw``'s frequencies).

    Complex data are divided pointwise; real maps (``|A|^2``) are divided
    by ``|background|^2``.
    """
    if isinstance(raw, ComplexTrace):
        bg = _background_on(background, raw.freqs)
        return ComplexTrace(raw.freqs, np.asarray(raw.values, dtype=complex) / bg, dict(raw.meta))
    if isinstance(raw, Map2D):
        bg = _background_on(background, raw.y_axis)
        cells = raw.cells / bg[None, :] if raw.is_complex else raw.cells / np.abs(bg)[None, :] ** 2
        return replace(raw, cells=cells, meta=dict(raw.meta))
    raise TypeError("raw must be a ComplexTrace or Map2D")


def linecut(m: Map2D, axis, at, interpolate=False) -> ComplexTrace:
    """Cut at ``x = at`` (trace over frequency) or ``y = at`` (trace over x).

    Without ``interpolate`` the nearest row/column is returned and the
    actual axis value is recorded in ``meta['cut_at']``.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    ax = m.x_axis if axis == "x" else m.y_axis
    other = m.y_axis if axis == "x" else m.x_axis
    cells = m.cells if axis == "x" else m.cells.T
    lo, hi = ax.min(), ax.max()
    if not lo <= at <= hi:
        raise OutOfRangeError(f"cut value {at} outside axis range [{lo}, {hi}]")
    meta = dict(m.meta)
    meta.update(cut_axis=axis, cut_request=float(at))
    if interpolate:
        order = np.argsort(ax)
        a = ax[order]
        j = int(np.clip(np.searchsorted(a, at), 1, a.size - 1))
        i0, i1 = order[j - 1], order[j]
        w = (at - ax[i0]) / (ax[i1] - ax[i0])
        vals = (1.0 - w) * cells[i0] + w * cells[i1]
        meta["cut_at"] = float(at)
    else:
        i = int(np.argmin(np.abs(ax - at)))
        vals = cells[i].copy()
        meta["cut_at"] = float(ax[i])
    o = np.argsort(other)
    return ComplexTrace(other[o], vals[o], meta)


def voltage_axes_to_detuning(m: Map2D, lev: LeverArms | None, V_pR=None) -> Map2D:
    """Relabel a left-plunger voltage axis as detuning (Hz, i.e. energy / h).

    The right plunger sits at ``V_pR`` (default: ``meta['V_pR']`` if present,
    otherwise the lever-arm reference).
    """
    if lev is None:
        raise ConfigError(["lever arms are required to convert a voltage axis"])
    if m.x_unit != "V":
        raise ConfigError([f"x axis unit is {m.x_unit!r}, expected 'V'"])
    if V_pR is None:
        V_pR = m.meta.get("V_pR", lev.V_pR0)
    eps = detuning_from_voltages(lev, m.x_axis, V_pR)
    meta = dict(m.meta)
    meta.update(lever_arms=_jsonable(lev), V_pR=float(V_pR))
    return Map2D(eps, m.y_axis, m.cells, "Hz", m.y_unit, meta)


def detuning_axes_to_voltage(m: Map2D, lev: LeverArms, V_pR=None) -> Map2D:
    """Inverse of :func:`voltage_axes_to_detuning`."""
    if m.x_unit != "Hz":
        raise ConfigError([f"x axis unit is {m.x_unit!r}, expected 'Hz'"])
    if V_pR is None:
        V_pR = m.meta.get("V_pR", lev.V_pR0)
    v = voltage_from_detuning(lev, m.x_axis, V_pR)
    return Map2D(v, m.y_axis, m.cells, "V", m.y_unit, dict(m.meta))


# --- presets ----------------------------------------------------------------

def list_presets():
    root = resources.files("cqedsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name):
    """Parameter preset shipped with the package (JSON, rates in Hz)."""
    res = resources.files("cqedsim") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(list_presets())}"])
    return json.loads(res.read_text())


def scs_from_preset(doc, epsilon=0.0):
    """``(ScsParams, NoiseRates)`` from a multilevel preset document."""
    from .multilevel import NoiseRates, ScsParams

    if doc.get("kind") != "multilevel":
        raise ConfigError([f"preset kind {doc.get('kind')!r} is not 'multilevel'"])
    h = dict(doc["hamiltonian"])
    eta = {k: h.pop(k) for k in ("eta_L", "eta_R") if k in h}
    if doc["parity"] == "even":
        s = ScsParams.even(epsilon, h["Delta_L"], h["t11"], h["t22"], Delta_R=h["Delta_R"],
                           t12=h["t12"], t21=h["t21"], g0=doc["g0"], T=doc.get("T", 0.01), **eta)
    else:
        s = ScsParams.odd(epsilon, **h, g0=doc["g0"], T=doc.get("T", 0.01), **eta)
    n = doc.get("noise", {})
    return s, NoiseRates(n.get("Gamma_eps", 0.0), dict(n.get("Gamma_br", {})))


def charge_qubit_from_preset(doc, epsilon=0.0):
    """``(ResonatorParams, EnvironmentParams, ChargeQubitParams)`` from a two-level preset."""
    from .chargeq import ChargeQubitParams
    from .resonator import EnvironmentParams, ResonatorParams

    if doc.get("kind") != "two-level":
        raise ConfigError([f"preset kind {doc.get('kind')!r} is not 'two-level'"])
    return (ResonatorParams(**doc["resonator"]), EnvironmentParams(**doc.get("env", {})),
            ChargeQubitParams(epsilon, **doc["qubit"]))
