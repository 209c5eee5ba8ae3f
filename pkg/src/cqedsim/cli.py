"""Command-line front end: ``cqedsim simulate | fit | wigner | report``.

Exit codes: 0 success, 1 numerical failure, 2 configuration or I/O failure.
A JSON run config (``--config``, schema ``cqedsim-run/1``) supplies any
option not given on the command line.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import datio, svg
from .chargeq import ChargeQubitParams, cooperativity, s21_map
from .errors import ConfigError, CqedError
from .records import ComplexTrace, Map2D
from .resonator import (MEASURED_KAPPAS, EnvironmentParams, ResonatorParams, coil_for_crossing,
                        flux_to_frequency, s21_bare)

RUN_SCHEMA = "cqedsim-run/1"

DEFAULTS = {
    "simulate": {"preset": None, "model": None, "fr": None, "eps_range": None, "f_span": None,
                 "f_range": None, "nf": 401, "neps": 201, "flux_sweep": False, "flux_range": None,
                 "eps": 0.0, "noise": 0.0, "power": False, "dephasing": "linear", "name": None,
                 "svg": True},
    "fit": {"problem": None, "data": None, "model": None, "preset": None, "free": None,
            "init": [], "name": None},
    "wigner": {"lambda_W": None, "alpha": 1.0, "alpha_range": None, "band": None,
               "hbar_omega": 70e9, "levels": 8, "grid_n": 320, "grid_L": 6.0,
               "density": None, "check_convergence": False, "name": None},
    "report": {"inputs": []},
}
GLOBALS = {"out": "out", "parallel": 1, "seed": 0}


# --- argument handling ------------------------------------------------------

def _range(text):
    parts = [float(v) for v in str(text).split(":")]
    if len(parts) not in (2, 3):
        raise ValueError
    return parts


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run config")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default out)")
    common.add_argument("--parallel", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="noise seed (u64)")

    ap = argparse.ArgumentParser(prog="cqedsim", parents=[common],
                                 description="cQED charge-qubit and four-level simulation and fitting")
    sub = ap.add_subparsers(dest="command")
    S = argparse.SUPPRESS

    p = sub.add_parser("simulate", parents=[common], help="simulate a trace or map")
    p.add_argument("--preset", default=S, help=f"one of: {', '.join(datio.list_presets())}")
    p.add_argument("--model", choices=("bare", "two-level", "multilevel"), default=S)
    p.add_argument("--fr", type=float, default=S, help="resonator frequency (Hz)")
    p.add_argument("--eps-range", dest="eps_range", default=S, help="lo:hi detuning (Hz)")
    p.add_argument("--f-span", dest="f_span", type=float, default=S, help="drive span around f_r (Hz)")
    p.add_argument("--f-range", dest="f_range", default=S, help="lo:hi drive range (Hz)")
    p.add_argument("--nf", type=int, default=S, help="drive points (default 401)")
    p.add_argument("--neps", type=int, default=S, help="detuning / flux points (default 201)")
    p.add_argument("--flux-sweep", dest="flux_sweep", action="store_true", default=S)
    p.add_argument("--flux-range", dest="flux_range", default=S, help="lo:hi coil voltage (V)")
    p.add_argument("--eps", type=float, default=S, help="detuning for flux sweeps (Hz)")
    p.add_argument("--noise", type=float, default=S, help="Gaussian sigma per component")
    p.add_argument("--power", action="store_true", default=S, help="store |S21|^2 instead of S21")
    p.add_argument("--dephasing", choices=("linear", "quadratic"), default=S)
    p.add_argument("--name", default=S)
    p.add_argument("--no-svg", dest="svg", action="store_false", default=S)

    p = sub.add_parser("fit", parents=[common], help="fit data")
    p.add_argument("--problem", default=S, help="fit problem JSON (cqedsim-fit/1)")
    p.add_argument("--data", default=S, help="trace or map file")
    p.add_argument("--model", choices=("bare", "two-level"), default=S)
    p.add_argument("--preset", default=S, help="preset supplying fixed and initial values")
    p.add_argument("--free", default=S, help="comma-separated free parameters")
    p.add_argument("--init", action="append", default=S, help="name=value starting value")
    p.add_argument("--name", default=S)

    p = sub.add_parser("wigner", parents=[common], help="two-charge confinement spectra")
    p.add_argument("--lambda", dest="lambda_W", type=float, default=S, help="Wigner ratio")
    p.add_argument("--alpha", type=float, default=S, help="anisotropy (default 1)")
    p.add_argument("--alpha-range", dest="alpha_range", default=S, help="lo:hi:step sweep")
    p.add_argument("--band", default=S, help="lo:hi band for the gap (Hz)")
    p.add_argument("--hbar-omega", dest="hbar_omega", type=float, default=S, help="orbital energy (Hz)")
    p.add_argument("--levels", type=int, default=S)
    p.add_argument("--grid-n", dest="grid_n", type=int, default=S)
    p.add_argument("--grid-L", dest="grid_L", type=float, default=S)
    p.add_argument("--density", type=int, default=S, help="write the density of this level")
    p.add_argument("--check-convergence", dest="check_convergence", action="store_true", default=S)
    p.add_argument("--name", default=S)

    p = sub.add_parser("report", parents=[common], help="tabulate fit results")
    p.add_argument("inputs", nargs="*", default=S, help="result files or directories")
    return ap


def resolve_options(argv):
    """Merge command line, config file and defaults; returns (command, options)."""
    args = vars(build_parser().parse_args(argv))
    problems = []
    cfg = {}
    if "config" in args:
        path = Path(args.pop("config"))
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
        if cfg.pop("schema", RUN_SCHEMA) != RUN_SCHEMA:
            problems.append(f"config schema must be {RUN_SCHEMA!r}")
    command = args.pop("command", None) or cfg.pop("command", None)
    cfg.pop("command", None)
    if command not in DEFAULTS:
        problems.append(f"unknown or missing command {command!r}; choose from {sorted(DEFAULTS)}")
        raise ConfigError(problems)
    allowed = set(DEFAULTS[command]) | set(GLOBALS)
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        problems.append(f"unknown config keys for {command}: {unknown}")
    opts = dict(GLOBALS)
    opts.update(DEFAULTS[command])
    opts.update({k: v for k, v in cfg.items() if k in allowed})
    opts.update(args)
    if problems:
        raise ConfigError(problems)
    return command, opts


# --- simulate ---------------------------------------------------------------

def _rows_parallel(fn, axis, workers, *args):
    """Evaluate ``fn(*args, chunk)`` over chunks of ``axis``; rows are independent."""
    if workers <= 1 or len(axis) < 2 * workers:
        return fn(*args, axis)
    chunks = np.array_split(np.asarray(axis), workers)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(fn, *[[a] * len(chunks) for a in args], chunks))
    return np.concatenate(parts, axis=0)


def _ml_rows(p, env, s, n, f_axis, dephasing, eps_chunk):
    from .multilevel import s21_multilevel_map

    return s21_multilevel_map(p, env, s, n, eps_chunk, f_axis, dephasing=dephasing)


def _tl_rows(p, env, q, f_axis, eps_chunk):
    return s21_map(p, env, q, eps_chunk, f_axis)


def _validate_simulate(o):
    problems = []
    preset = None
    if o["preset"]:
        try:
            preset = datio.load_preset(o["preset"])
        except ConfigError as exc:
            problems += exc.problems
    model = o["model"]
    if model is None:
        if preset is None:
            problems.append("give --preset or --model")
        else:
            model = preset["kind"]
    if model not in ("bare", "two-level", "multilevel"):
        if model is not None:
            problems.append(f"preset kind {model!r} cannot be simulated directly")
    if preset is not None and model in ("two-level", "multilevel") and preset["kind"] != model:
        problems.append(f"preset {o['preset']} is {preset['kind']}, not {model}")
    if model == "bare" and o["fr"] is None and (preset is None or preset["kind"] == "two-level-joint"):
        problems.append("bare simulation needs --fr")
    for key in ("nf", "neps"):
        if int(o[key]) < 2:
            problems.append(f"--{key} must be >= 2")
    for key in ("eps_range", "f_range", "flux_range"):
        if o[key] is not None:
            try:
                if len(_range(o[key])) != 2:
                    raise ValueError
            except ValueError:
                problems.append(f"--{key.replace('_', '-')} must look like lo:hi")
    if o["noise"] < 0:
        problems.append("--noise must be >= 0")
    if o["flux_sweep"] and model != "two-level":
        problems.append("--flux-sweep needs the two-level model")
    if o["parallel"] < 1:
        problems.append("--parallel must be >= 1")
    if problems:
        raise ConfigError(problems)
    return model, preset


def _f_axis(o, f_center, span_default):
    if o["f_range"]:
        lo, hi = _range(o["f_range"])
    else:
        span = o["f_span"] or span_default
        lo, hi = f_center - span / 2, f_center + span / 2
    return np.linspace(lo, hi, int(o["nf"]))


def _add_noise(values, sigma, seed):
    if not sigma:
        return values
    rng = np.random.default_rng(seed)
    if np.iscomplexobj(values):
        return values + sigma * (rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape))
    return values + sigma * rng.standard_normal(values.shape)


def cmd_simulate(o):
    model, preset = _validate_simulate(o)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    config = {k: o[k] for k in DEFAULTS["simulate"]}
    config["seed"] = o["seed"]
    config["model"] = model
    ihash = datio.content_hash(config)
    meta = {"generator": "cqedsim simulate", "config": config, "input_hash": ihash}

    if model == "bare":
        if o["fr"] is None and preset["kind"] == "two-level":
            p = ResonatorParams(**preset["resonator"])
            env = EnvironmentParams(**preset.get("env", {}))
        else:
            fr = o["fr"] if o["fr"] is not None else preset["f_r"][0]
            p, env = MEASURED_KAPPAS.at(fr), EnvironmentParams()
        f = _f_axis(o, p.f_r, 20.0 * p.kappa)
        z = _add_noise(s21_bare(p, env, f), o["noise"], o["seed"])
        meta.update(resonator=datio._jsonable(p), env=datio._jsonable(env))
        name = o["name"] or f"bare_fr{p.f_r / 1e9:.4f}GHz"
        path = datio.write_trace(out / name, ComplexTrace(f, z, meta), ihash)
        if o["svg"]:
            svg.line_plot(out / f"{name}.svg", f / 1e9, [np.abs(z) ** 2], ["|S21|^2"],
                          title=name, xlabel="f_d (GHz)", ylabel="|S21|^2")
        print(f"wrote {path}")
        return 0

    if model == "two-level":
        preset = preset or datio.load_preset("cq_flux_sweep" if o["flux_sweep"] else "cq_eps_sweep")
        p, env, q = datio.charge_qubit_from_preset(preset, o["eps"])
        if o["fr"] is not None:
            p = MEASURED_KAPPAS.at(o["fr"], p.phi)
        meta.update(resonator=datio._jsonable(p), env=datio._jsonable(env), qubit=datio._jsonable(q))
        if o["flux_sweep"]:
            fl = preset.get("flux") or datio.load_preset("cq_flux_sweep")["flux"]
            coil = coil_for_crossing(2.0 * q.t_c, fl["V_cross"], fl["L0_per_squid"], fl["N_squid"], fl["C_r"])
            lo, hi = _range(o["flux_range"]) if o["flux_range"] else (fl["V_cross"] - 0.02, fl["V_cross"] + 0.02)
            x = np.linspace(lo, hi, int(o["neps"]))
            f = _f_axis(o, 2.0 * q.t_c, 0.8e9)
            frs = flux_to_frequency(x, coil, fl["L0_per_squid"], fl["N_squid"], fl["C_r"])
            rows = []
            for fr in frs:
                pr = MEASURED_KAPPAS.at(float(fr), p.phi)
                rows.append(s21_map(pr, env, q, [q.epsilon], f)[0])
            cells, x_unit = np.array(rows), "V"
            meta["coil"] = datio._jsonable(coil)
            name = o["name"] or f"{o['preset'] or 'two-level'}_flux"
        else:
            lo, hi = _range(o["eps_range"]) if o["eps_range"] else (-4e9, 4e9)
            x = np.linspace(lo, hi, int(o["neps"]))
            f = _f_axis(o, p.f_r, 0.8e9)
            cells = _rows_parallel(_tl_rows, x, int(o["parallel"]), p, env, q, f)
            x_unit = "Hz"
            name = o["name"] or f"{o['preset'] or 'two-level'}_fr{p.f_r / 1e9:.4f}GHz"
    else:
        s, n = datio.scs_from_preset(preset or datio.load_preset("fig5_odd"))
        fr = o["fr"] if o["fr"] is not None else (preset or {}).get("f_r", [5.18e9])[0]
        p, env = MEASURED_KAPPAS.at(fr), EnvironmentParams()
        lo, hi = _range(o["eps_range"]) if o["eps_range"] else (-10e9, 10e9)
        x = np.linspace(lo, hi, int(o["neps"]))
        f = _f_axis(o, fr, 0.8e9)
        cells = _rows_parallel(_ml_rows, x, int(o["parallel"]), p, env, s, n, f, o["dephasing"])
        x_unit = "Hz"
        meta.update(resonator=datio._jsonable(p), env=datio._jsonable(env), scs=datio._jsonable(s),
                    noise=datio._jsonable(n))
        name = o["name"] or f"{o['preset'] or 'multilevel'}_fr{fr / 1e9:.4f}GHz"

    cells = _add_noise(cells, o["noise"], o["seed"])
    power = np.abs(cells) ** 2 / env.a ** 2
    m = Map2D(x, f, power if o["power"] else cells, x_unit, "Hz", meta)
    files = datio.write_map(out / name, m, ihash)
    if o["svg"]:
        xs = x / 1e9 if x_unit == "Hz" else x * 1e3
        xl = "detuning (GHz)" if x_unit == "Hz" else "V_flux (mV)"
        svg.heatmap(out / f"{name}.svg", xs, f / 1e9, power, title=f"{name}: |A/A0|^2",
                    xlabel=xl, ylabel="f_d (GHz)")
    for fp in files:
        print(f"wrote {fp}")
    return 0


# --- fit --------------------------------------------------------------------

def derived_quantities(values, fixed=None):
    """Sweet-spot qubit frequency, coupling at resonance and cooperativity."""
    v = dict(fixed or {})
    v.update(values)
    out = {}
    if "f_r" in v:
        out["f_r"] = v["f_r"]
    if "kappa_int" in v and "kappa_ext" in v:
        out["kappa"] = v["kappa_int"] + v["kappa_ext"]
        out["kappa_ext"] = v["kappa_ext"]
    if "t_c" in v:
        out["t_c"] = v["t_c"]
        out["f_q_sweet"] = 2.0 * v["t_c"]
    if "g0" in v:
        out["g0"] = v["g0"]
        if "t_c" in v and "f_r" in v:
            out["g_eff_resonance"] = v["g0"] * min(1.0, 2.0 * v["t_c"] / v["f_r"])
    if "Gamma0" in v:
        out["Gamma"] = v["Gamma0"]
    if all(k in out for k in ("g0", "kappa", "Gamma")) and out["kappa"] > 0 and out["Gamma"] > 0:
        out["C"] = cooperativity(out["g0"], out["kappa"], out["Gamma"])
    return out


def _fit_from_data(o):
    from .fitkit import Dataset, FitProblem, Parameter, fit, fit_bare, map_dataset

    path = Path(o["data"])
    try:
        datio._data_files(path)
    except FileNotFoundError:
        raise FileNotFoundError(f"dataset not found: {path}") from None
    obj = datio.read_dataset(path)
    model = o["model"] or ("bare" if isinstance(obj, ComplexTrace) else "two-level")
    init = {}
    for item in o["init"] or []:
        k, _, val = item.partition("=")
        init[k.strip()] = float(val)
    files = datio._data_files(path)
    prov = [{"name": path.name, "files": [str(f) for f in files],
             "data_hash": datio.bytes_hash(b"".join(f.read_bytes() for f in files)),
             "sidecar_ok": datio.verify(path)}]
    if model == "bare":
        if not isinstance(obj, ComplexTrace):
            raise ConfigError(["the bare model needs a trace file"])
        return fit_bare(obj, init=init), {}, prov
    if not isinstance(obj, Map2D) or not obj.is_complex:
        raise ConfigError(["the two-level model needs a complex map"])
    meta = obj.meta
    base = {}
    if o["preset"]:
        rp, env, q = datio.charge_qubit_from_preset(datio.load_preset(o["preset"]))
        base.update(f_r=rp.f_r, kappa_int=rp.kappa_int, kappa_ext=rp.kappa_ext_mag, phi=rp.phi,
                    a=env.a, alpha=env.alpha, tau=env.tau, t_c=q.t_c, g0=q.g0, Gamma0=q.Gamma0,
                    Gamma_eps=q.Gamma_eps)
    if "resonator" in meta:
        r = meta["resonator"]
        base.update(f_r=r["f_r"], kappa_int=r["kappa_int"], kappa_ext=r["kappa_ext_mag"], phi=r["phi"])
    if "env" in meta:
        base.update(meta["env"])
    if "qubit" in meta and not o["preset"]:
        base.update({k: meta["qubit"][k] for k in ("t_c", "g0", "Gamma0", "Gamma_eps")})
    base.update(init)
    free = (o["free"] or "t_c,g0,Gamma0").split(",")
    needed = ("f_r", "kappa_int", "kappa_ext", "phi", "a", "alpha", "tau", "t_c", "g0", "Gamma0", "Gamma_eps")
    missing = [k for k in needed if k not in base]
    if missing:
        raise ConfigError([f"no value for {k}; give --preset or --init {k}=..." for k in missing])
    bad = [k for k in free if k not in needed]
    if bad:
        raise ConfigError([f"unknown free parameter {k!r}" for k in bad])
    if obj.x_unit != "Hz":
        raise ConfigError([f"map x axis is {obj.x_unit!r}; convert to detuning (Hz) first"])
    ds = map_dataset(obj, name=path.name)
    params = []
    for k in needed:
        lo = 0.0 if k in ("kappa_int", "kappa_ext", "t_c", "g0", "Gamma0", "Gamma_eps", "a", "tau") else -np.inf
        params.append(Parameter(k, float(base[k]), lo, np.inf, fixed=k not in free))
    res = fit(FitProblem([ds], params))
    fixed = {k: base[k] for k in needed if k not in free}
    return res, fixed, prov


def cmd_fit(o):
    from .fitkit.io import load_problem, write_result
    from .fitkit import fit

    problems = []
    if not o["problem"] and not o["data"]:
        problems.append("give --problem or --data")
    if o["problem"] and o["data"]:
        problems.append("--problem and --data are exclusive")
    if problems:
        raise ConfigError(problems)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    if o["problem"]:
        path = Path(o["problem"])
        if not path.exists():
            raise FileNotFoundError(f"problem file not found: {path}")
        problem, opts, ihash, prov = load_problem(path)
        try:
            res = fit(problem, **opts)
        except CqedError:
            for pv in prov:
                print(f"dataset {pv['name']}: files {pv['files']} sha256 {pv['data_hash']}", file=sys.stderr)
            raise
        fixed = {p.name: p.value for p in problem.params if p.fixed}
        name = o["name"] or path.stem
    else:
        res, fixed, prov = _fit_from_data(o)
        ihash = datio.content_hash({"data": prov, "options": {k: o[k] for k in DEFAULTS["fit"]}})
        name = o["name"] or datio._stem(o["data"]).name
    derived = derived_quantities(res.values, fixed)
    doc = write_result(out / f"{name}.fit.json", res, ihash, prov, derived)
    lines = [f"fit {name}: {res.status} ({res.message})", f"input hash {ihash}", ""]
    for k in res.free:
        lines.append(f"  {k:>16s} = {res.values[k]:.9g} +/- {res.sigma2[k]:.3g} (2 sigma)")
    if res.frozen:
        lines.append(f"  frozen (unidentifiable): {', '.join(res.frozen)}")
    lines.append("")
    for k, v in derived.items():
        lines.append(f"  {k:>16s} = {v:.6g}")
    text = "\n".join(lines) + "\n"
    (out / f"{name}.report.txt").write_text(text)
    print(text, end="")
    return 0 if doc["status"] == "converged" else 1


# --- wigner -----------------------------------------------------------------

def cmd_wigner(o):
    from .wigner import ConfinementModel, GridSpec, anisotropy_sweep, charge_density, solve_relative

    problems = []
    if o["lambda_W"] is None:
        problems.append("--lambda is required")
    band = None
    if o["band"]:
        try:
            band = tuple(_range(o["band"]))
            if len(band) != 2:
                raise ValueError
        except ValueError:
            problems.append("--band must look like lo:hi")
    alphas = None
    if o["alpha_range"]:
        try:
            lo, hi, step = _range(o["alpha_range"])
            n = int(round((hi - lo) / step)) + 1
            alphas = np.round(np.linspace(lo, lo + (n - 1) * step, n), 12)
        except (ValueError, ZeroDivisionError):
            problems.append("--alpha-range must look like lo:hi:step")
    try:
        grid = GridSpec(float(o["grid_L"]), int(o["grid_n"]))
    except ValueError as exc:
        problems.append(str(exc))
    if problems:
        raise ConfigError(problems)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    hw = float(o["hbar_omega"])
    lam = float(o["lambda_W"])
    tag = o["name"] or f"wigner_l{lam:g}"
    if alphas is not None:
        res = anisotropy_sweep(lam, alphas, grid, int(o["levels"]), hw, band, int(o["parallel"]))
        gap = res.delta_ST_hz()
        path = out / f"{tag}_sweep.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "level_index", "parity", "E_over_hw", "delta_ST_ghz"])
            for a, s in zip(res.alphas, res.spectra):
                if s is None:
                    w.writerow([f"{a:.12g}", "", "failed", "", ""])
                    continue
                for i, (e, lab) in enumerate(zip(s.levels, s.parity_labels())):
                    w.writerow([f"{a:.12g}", i, lab, f"{e:.17g}", f"{s.delta_ST_hz / 1e9:.17g}"])
        svg.line_plot(out / f"{tag}_sweep.svg", res.alphas, [gap / 1e9], ["Delta_ST"],
                      title=f"lambda_W = {lam:g}", xlabel="alpha", ylabel="Delta_ST (GHz)",
                      band=None if band is None else (band[0] / 1e9, band[1] / 1e9))
        for a, g in zip(res.alphas, gap):
            print(f"alpha = {a:.4g}: Delta_ST = {g / 1e9:.4f} GHz" if np.isfinite(g)
                  else f"alpha = {a:.4g}: failed ({res.errors[float(a)]})")
        if band is not None:
            print(f"first in-band alpha: {res.first_in_band}")
            edge = res.crossing(band[1])
            if edge is not None:
                print(f"interpolated band-entry alpha: {edge:.4f}")
        print(f"wrote {path}")
        return 0 if any(s is not None for s in res.spectra) else 1
    model = ConfinementModel(hw, lam, float(o["alpha"]))
    spec = solve_relative(model, grid, int(o["levels"]), check_convergence=bool(o["check_convergence"]),
                          keep_vectors=o["density"] is not None)
    path = out / f"{tag}_a{model.alpha:g}_levels.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "energy_hbar_omega", "parity"])
        for i, (e, lab) in enumerate(zip(spec.levels, spec.parity_labels())):
            w.writerow([i, f"{e:.17g}", lab])
    print(f"levels (hbar omega): {' '.join(f'{e:.5f}' for e in spec.levels)}")
    print(f"Delta_ST = {spec.delta_ST:.5f} hbar omega = {spec.delta_ST_hz / 1e9:.4f} GHz")
    if o["density"] is not None:
        x1, y1, n = charge_density(model, grid, int(o["density"]), spec)
        m = Map2D(x1, y1, n, "l_x", "l_x", {"model": datio._jsonable(model), "level": int(o["density"])})
        datio.write_map(out / f"{tag}_a{model.alpha:g}_density{int(o['density'])}", m)
        svg.heatmap(out / f"{tag}_a{model.alpha:g}_density{int(o['density'])}.svg", x1, y1, n,
                    title="single-particle density", xlabel="x / l_x", ylabel="y / l_x")
    print(f"wrote {path}")
    return 0


# --- report -----------------------------------------------------------------

COLUMNS = ("t_c", "f_r", "g0", "Gamma", "kappa", "kappa_ext", "C")


def cmd_report(o):
    out = Path(o["out"])
    inputs = [Path(p) for p in (o["inputs"] or [])] or ([out] if out.exists() else [])
    missing = [str(p) for p in inputs if not p.exists()]
    if missing:
        raise FileNotFoundError("missing report inputs: " + ", ".join(missing))
    files = []
    for p in inputs:
        files += sorted(p.glob("*.fit.json")) if p.is_dir() else [p]
    rows, warnings = [], []
    for f in files:
        doc = json.loads(f.read_text())
        d = doc.get("derived", {})
        row = {"name": f.name[: -len(".fit.json")] if f.name.endswith(".fit.json") else f.stem,
               "status": doc.get("status", "?"), "input_hash": (doc.get("input_hash") or "")[:12]}
        row.update({c: d.get(c) for c in COLUMNS})
        rows.append(row)
        for pv in doc.get("provenance", []):
            for df in pv.get("files", []):
                if not Path(df).exists():
                    warnings.append(f"{row['name']}: data file {df} is missing")
            fs = [Path(x) for x in pv.get("files", [])]
            if fs and all(x.exists() for x in fs):
                now = datio.bytes_hash(b"".join(x.read_bytes() for x in fs))
                if pv.get("data_hash") and now != pv["data_hash"]:
                    warnings.append(f"{row['name']}: data changed since the fit (hash mismatch)")
                if datio.verify(fs[0]) is False:
                    warnings.append(f"{row['name']}: sidecar hash does not match {fs[0]} (integrity)")
    out.mkdir(parents=True, exist_ok=True)
    scale = {"t_c": 1e9, "f_r": 1e9, "g0": 1e6, "Gamma": 1e6, "kappa": 1e6, "kappa_ext": 1e6, "C": 1}
    units = {"t_c": "GHz", "f_r": "GHz", "g0": "MHz", "Gamma": "MHz", "kappa": "MHz", "kappa_ext": "MHz", "C": ""}
    head = ["name"] + [f"{c} ({units[c]})" if units[c] else c for c in COLUMNS] + ["status", "input hash"]
    fmt = lambda c, v: "" if v is None else f"{v / scale[c]:.4g}"
    md = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        md.append("| " + " | ".join([r["name"]] + [fmt(c, r[c]) for c in COLUMNS]
                                    + [r["status"], r["input_hash"]]) + " |")
    if warnings:
        md += ["", "Integrity warnings:"] + [f"- {w}" for w in warnings]
    text = "\n".join(md) + "\n"
    (out / "summary.md").write_text(text)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", *COLUMNS, "status", "input_hash"])
        for r in rows:
            w.writerow([r["name"], *["" if r[c] is None else f"{r[c]:.17g}" for c in COLUMNS],
                        r["status"], r["input_hash"]])
    print(text, end="")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "wigner": cmd_wigner, "report": cmd_report}


def main(argv=None):
    try:
        command, opts = resolve_options(sys.argv[1:] if argv is None else argv)
        return COMMANDS[command](opts)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except CqedError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
