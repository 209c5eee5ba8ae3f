"""Ready-made fit set-ups: bare resonator, joint 2-D maps, thermometry, synthesis."""
from __future__ import annotations

import numpy as np

from ..constants import E_CHARGE, KB, TWO_PI
from ..errors import NoFeatureError
from ..records import ComplexTrace, Map2D
from .engine import Dataset, FitProblem, FitResult, Parameter, fit
from .models import RES_PARAMS, get_model

#: sech^2(x) = 1/2 at x = acosh(sqrt 2)
SECH2_HALF = float(np.arccosh(np.sqrt(2.0)))


def synthesize(model_id, params, coords, sigma=0.0, seed=None, binding=None, name=""):
    """Forward-evaluate a model and add seeded Gaussian noise.

    ``sigma`` is the standard deviation of each real component (real and
    imaginary part separately for complex models).  The generating
    parameters, noise level and seed are recorded in ``dataset.meta``.
    """
    model = get_model(model_id)
    coords = {k: np.asarray(v, dtype=float).ravel() for k, v in coords.items()}
    p = {k: float(v) for k, v in params.items()}
    clean = model.evaluate(coords, p)
    data = np.array(clean, copy=True)
    if sigma:
        rng = np.random.default_rng(seed)
        if model.complex:
            data = data + sigma * (rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape))
        else:
            data = data + sigma * rng.standard_normal(data.shape)
    meta = {"generator": model.id, "params": p, "sigma": float(sigma), "seed": seed}
    return Dataset(model, coords, data, binding=dict(binding or {}), name=name, meta=meta)


def _edge_mask(n, frac=0.15):
    k = max(2, int(frac * n))
    m = np.zeros(n, dtype=bool)
    m[:k] = m[-k:] = True
    return m


def bare_initial_guess(trace: ComplexTrace):
    """Heuristic starting point for :func:`fit_bare`.

    The electrical delay comes from the mean phase slope on the trace edges,
    the depth of the normalised dip sets ``kappa_int / kappa`` and its
    half-depth width sets ``kappa``.
    """
    f, z = trace.freqs, np.asarray(trace.values, dtype=complex)
    span = f[-1] - f[0]
    edge = _edge_mask(f.size)
    ph = np.unwrap(np.angle(z))
    slope = np.polyfit(f[edge], ph[edge], 1)[0]
    tau = max(0.0, -slope / TWO_PI)
    z1 = z * np.exp(1j * TWO_PI * f * tau)
    ref = np.mean(z1[edge])
    a = float(np.median(np.abs(z1[edge])))
    alpha = float(np.angle(ref))
    z2 = z1 / (a * np.exp(1j * alpha))
    mag2 = np.abs(z2) ** 2
    k = int(np.argmin(mag2))
    depth = float(min(np.sqrt(mag2[k]), 1.0))
    drop = 1.0 - mag2
    half = drop >= drop[k] / 2.0
    lo = hi = k
    while lo > 0 and half[lo - 1]:
        lo -= 1
    while hi < f.size - 1 and half[hi + 1]:
        hi += 1
    kappa = f[hi] - f[lo] if drop[k] > 0 and hi > lo else span / 20.0
    return {"f_r": float(f[k]), "kappa_int": kappa * depth, "kappa_ext": kappa * (1.0 - depth),
            "phi": 0.0, "a": a, "alpha": alpha, "tau": tau}


def fit_bare(trace: ComplexTrace, init=None, fix=(), weights=None, **kw) -> FitResult:
    """Fit the environment-corrected bare hanger model to a trace.

    The trace should span at least five linewidths so the background terms
    are constrained.  ``init`` overrides individual starting values, ``fix``
    holds parameters at them.
    """
    f = trace.freqs
    span = f[-1] - f[0]
    guess = bare_initial_guess(trace)
    guess.update(init or {})
    bounds = {"f_r": (f[0], f[-1]), "kappa_int": (0.0, span), "kappa_ext": (0.0, span),
              "phi": (-np.pi, np.pi), "a": (0.0, np.inf), "alpha": (-np.inf, np.inf),
              "tau": (0.0, np.inf)}
    scales = {"phi": 1.0, "alpha": 1.0, "tau": 1.0 / span,
              "kappa_int": span / 20.0, "kappa_ext": span / 20.0}
    params = [Parameter(n, float(np.clip(guess[n], *bounds[n])), *bounds[n], fixed=n in fix,
                        scale=scales.get(n)) for n in RES_PARAMS]
    ds = Dataset("bare", {"f": f}, trace.values, weights=weights, name=trace.meta.get("name", ""))
    return fit(FitProblem([ds], params), **kw)


def map_label(m: Map2D, i=None):
    if m.meta.get("name"):
        return str(m.meta["name"])
    if "f_r" in m.meta:
        return f"{float(m.meta['f_r']) / 1e9:.4f}GHz"
    return f"map{i}"


def map_dataset(m: Map2D, model="two-level", binding=None, name=""):
    """Flatten a complex map into a dataset; the x axis becomes ``v`` (V) or ``eps`` (Hz)."""
    X, Y = np.meshgrid(m.x_axis, m.y_axis, indexing="ij")
    xkey = "eps" if m.x_unit.lower() in ("hz", "h*hz", "h.hz") else "v"
    return Dataset(model, {xkey: X, "f": Y}, m.cells, binding=dict(binding or {}), name=name)


SHARED_2D = ("t_c", "beta_pL", "Gamma0", "Gamma_eps")


def fit_2d_joint(maps, resonators, init, per_map_init, fix_Gamma0=None, bounds=None, **kw):
    """Simultaneous two-level fit of several plunger-voltage maps.

    ``maps``: complex :class:`Map2D` with ``x_axis`` the swept left plunger
    (V) and ``y_axis`` the drive frequency.  ``resonators``: per map a
    ``(ResonatorParams, EnvironmentParams)`` pair from a prior bare fit, held
    fixed.  Shared parameters ``t_c``, ``beta_pL``, ``Gamma0``, ``Gamma_eps``
    start from ``init``; per map ``g0`` and ``V_pL0`` start from
    ``per_map_init[i]`` and are reported as ``g0@label`` / ``V_pL0@label``
    with ``label`` from :func:`map_label`.  ``fix_Gamma0`` pins ``Gamma0``.
    """
    if not (len(maps) == len(resonators) == len(per_map_init)):
        raise ValueError("maps, resonators and per_map_init must have equal length")
    bounds = dict(bounds or {})
    b = {"t_c": (0.0, np.inf), "beta_pL": (0.0, np.inf), "Gamma0": (0.0, np.inf),
         "Gamma_eps": (0.0, np.inf), "g0": (0.0, np.inf), "V_pL0": (-np.inf, np.inf)}
    b.update(bounds)
    sv = dict(init)
    fixed = set()
    if fix_Gamma0 is not None:
        sv["Gamma0"] = float(fix_Gamma0)
        fixed.add("Gamma0")
    shared_flag = len(maps) >= 2
    params = [Parameter(n, float(sv[n]), *b[n], fixed=n in fixed, shared=shared_flag)
              for n in SHARED_2D]
    datasets = []
    labels = []
    for i, (m, (rp, env), pi) in enumerate(zip(maps, resonators, per_map_init)):
        lab = map_label(m, i)
        if lab in labels:
            raise ValueError(f"duplicate map label {lab!r}; set meta['name']")
        labels.append(lab)
        binding = {"f_r": rp.f_r, "kappa_int": rp.kappa_int, "kappa_ext": rp.kappa_ext_mag,
                   "phi": rp.phi, "a": env.a, "alpha": env.alpha, "tau": env.tau,
                   "g0": f"g0@{lab}", "V_pL0": f"V_pL0@{lab}"}
        params.append(Parameter(f"g0@{lab}", float(pi["g0"]), *b["g0"]))
        v_span = float(np.ptp(m.x_axis)) or 1.0
        params.append(Parameter(f"V_pL0@{lab}", float(pi["V_pL0"]), *b["V_pL0"], scale=v_span))
        datasets.append(map_dataset(m, binding=binding, name=lab))
    return fit(FitProblem(datasets, params), **kw)


def fit_g0_law(f_r, g0, sigma2=None):
    """Fit ``g0 = a sqrt(f_r)``; ``sigma2`` are 2-sigma errors on ``g0``, used as weights."""
    f_r = np.asarray(f_r, dtype=float)
    g0 = np.asarray(g0, dtype=float)
    a0 = float(np.sum(g0 * np.sqrt(f_r)) / np.sum(f_r))
    w = None if sigma2 is None else 1.0 / (np.asarray(sigma2, dtype=float) / 2.0) ** 2
    ds = Dataset("g0-law", {"f_r": f_r}, g0, weights=w)
    return fit(FitProblem([ds], [Parameter("scale_a", a0, 0.0, np.inf)]))


def coulomb_peak_fwhm(T_e, lever_arm):
    """Full width at half maximum (V) of the thermally broadened peak."""
    return 2.0 * SECH2_HALF * 2.0 * KB * T_e / (lever_arm * E_CHARGE)


def fit_thermometry(v, G, lever_arm, init=None, min_snr=6.0):
    """Electron temperature from a single Coulomb peak.

    ``lever_arm`` in eV/V.  Returns a dict with ``T_e`` (K), ``G_max``,
    ``V0``, ``c``, their 2-sigma half-widths under ``sigma2`` and the raw
    :class:`FitResult` under ``result``.  Raises :class:`NoFeatureError`
    for flat or monotone traces.
    """
    v = np.asarray(v, dtype=float)
    G = np.asarray(G, dtype=float)
    order = np.argsort(v)
    v, G = v[order], G[order]
    k = int(np.argmax(G))
    base = float(np.median(np.concatenate([G[: max(2, v.size // 10)], G[-max(2, v.size // 10):]])))
    dG = np.diff(G)
    noise = 1.4826 * np.median(np.abs(dG - np.median(dG))) / np.sqrt(2.0)
    height = G[k] - base
    if height <= max(min_snr * noise, 1e-12 * max(abs(G[k]), 1e-300)):
        raise NoFeatureError("peak not found: trace is flat within the noise")
    if k == 0 or k == v.size - 1:
        raise NoFeatureError("peak not found: maximum sits on the sweep edge (monotone trace)")
    half = G >= base + height / 2.0
    lo = hi = k
    while lo > 0 and half[lo - 1]:
        lo -= 1
    while hi < v.size - 1 and half[hi + 1]:
        hi += 1
    fwhm = max(v[hi] - v[lo], v[1] - v[0])
    T0 = fwhm * lever_arm * E_CHARGE / (4.0 * SECH2_HALF * KB)
    guess = {"Gmax": height, "V0": float(v[k]), "T_e": T0, "c": base}
    guess.update(init or {})
    span = float(v[-1] - v[0])
    params = [Parameter("Gmax", guess["Gmax"], 0.0, np.inf),
              Parameter("V0", guess["V0"], float(v[0]), float(v[-1]), scale=span),
              Parameter("T_e", guess["T_e"], 1e-6, np.inf),
              Parameter("c", guess["c"], scale=max(abs(height), 1e-300))]
    ds = Dataset("coulomb-peak", {"v": v}, G, binding={"lever": float(lever_arm)})
    res = fit(FitProblem([ds], params))
    out = {"T_e": res.values["T_e"], "G_max": res.values["Gmax"], "V0": res.values["V0"],
           "c": res.values["c"], "result": res}
    out["sigma2"] = {("G_max" if k == "Gmax" else k): s for k, s in res.sigma2.items()}
    return out
