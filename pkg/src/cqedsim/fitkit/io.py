"""JSON description of fit problems and results (schema ``cqedsim-fit/1``).

Problem document::

    {"schema": "cqedsim-fit/1",
     "params": [{"name": "f_r", "value": 5.1e9, "lo": 5e9, "hi": 5.2e9,
                 "fixed": false, "shared": false, "scale": null}, ...],
     "datasets": [{"model": "bare", "path": "trace.csv", "binding": {...},
                   "name": "...", "model_options": {...}}, ...],
     "absolute_sigma": null,
     "options": {"freeze_unidentifiable": false}}

Paths are relative to the document.  A dataset may carry ``coords`` and
``data`` inline instead of a path (complex data as ``{"re": [...], "im": [...]}``).
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..datio import canonical_json, read_dataset, _data_files
from ..errors import ConfigError
from ..records import ComplexTrace
from .engine import Dataset, FitProblem, FitResult, Parameter, fit
from .models import MultilevelModel, get_model
from .procedures import map_dataset

FIT_SCHEMA = "cqedsim-fit/1"
PARAM_KEYS = ("name", "value", "lo", "hi", "fixed", "shared", "scale")


def _num(v, default):
    if v is None:
        return default
    return float(v)


def _model(d):
    opts = d.get("model_options") or {}
    if d["model"] == "multilevel":
        return MultilevelModel(**opts)
    return get_model(d["model"])


def _inline_data(raw):
    if isinstance(raw, dict):
        return np.asarray(raw["re"], float) + 1j * np.asarray(raw["im"], float)
    return np.asarray(raw, float)


def load_problem(path):
    """Parse a problem document; returns ``(FitProblem, options, input_hash, provenance)``.

    Every problem found (unknown keys, missing files, bad models) is listed
    in one :class:`ConfigError`; missing files raise ``FileNotFoundError``
    naming the path.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    problems = []
    if doc.get("schema") != FIT_SCHEMA:
        problems.append(f"schema must be {FIT_SCHEMA!r}")
    for i, p in enumerate(doc.get("params", [])):
        extra = set(p) - set(PARAM_KEYS)
        if extra:
            problems.append(f"param {i}: unknown keys {sorted(extra)}")
        if "name" not in p or "value" not in p:
            problems.append(f"param {i}: name and value are required")
    missing = []
    for i, d in enumerate(doc.get("datasets", [])):
        if "model" not in d:
            problems.append(f"dataset {i}: model is required")
        if "path" in d:
            try:
                _data_files(base / d["path"])
            except FileNotFoundError:
                missing.append(str(base / d["path"]))
        elif "data" not in d:
            problems.append(f"dataset {i}: needs a path or inline data")
    if missing:
        raise FileNotFoundError("missing dataset file(s): " + ", ".join(missing))
    if problems:
        raise ConfigError(problems)

    h = hashlib.sha256(canonical_json(doc).encode())
    provenance = []
    datasets = []
    for i, d in enumerate(doc["datasets"]):
        model = _model(d)
        name = d.get("name", d.get("path", f"dataset{i}"))
        binding = d.get("binding", {})
        w = d.get("weights")
        if "path" in d:
            files = _data_files(base / d["path"])
            for f in files:
                h.update(f.read_bytes())
            provenance.append({"name": name, "files": [str(f) for f in files],
                               "data_hash": hashlib.sha256(b"".join(f.read_bytes() for f in files)).hexdigest()})
            obj = read_dataset(base / d["path"])
            if isinstance(obj, ComplexTrace):
                ds = Dataset(model, {"f": obj.freqs}, obj.values, binding, w, name)
            else:
                ds = map_dataset(obj, model=model, binding=binding, name=name)
                if w is not None:
                    ds.weights = np.asarray(w, float).ravel()
        else:
            ds = Dataset(model, d.get("coords", {}), _inline_data(d["data"]), binding, w, name)
            provenance.append({"name": name, "files": [], "data_hash": None})
        datasets.append(ds)
    params = [Parameter(p["name"], float(p["value"]), _num(p.get("lo"), -np.inf), _num(p.get("hi"), np.inf),
                        bool(p.get("fixed", False)), bool(p.get("shared", False)), p.get("scale"))
              for p in doc["params"]]
    problem = FitProblem(datasets, params, doc.get("absolute_sigma"))
    return problem, dict(doc.get("options", {})), h.hexdigest(), provenance


def result_document(result: FitResult, input_hash=None, provenance=None, derived=None):
    out = {"schema": FIT_SCHEMA, "input_hash": input_hash}
    out.update(result.as_dict())
    out["cost_history"] = list(result.cost_history)
    out["n_residuals"] = result.n_residuals
    if provenance is not None:
        out["provenance"] = provenance
    if derived:
        out["derived"] = derived
    return out


def write_result(path, result: FitResult, input_hash=None, provenance=None, derived=None):
    doc = result_document(result, input_hash, provenance, derived)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return doc


def run_problem(path):
    problem, opts, ih, prov = load_problem(path)
    res = fit(problem, **opts)
    return res, ih, prov
