"""Acceptance criteria A1-A10, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary).
Criteria that the model cannot meet as stated are strict xfails: they
still compute and print the honest verdict.
"""
import time

import numpy as np
import pytest

from cqedsim import datio, multilevel as ml
from cqedsim.chargeq import (ChargeQubitParams, cooperativity, qubit_frequency, resonator_lever_arm,
                             s21_coupled, s21_map)
from cqedsim.fitkit import fit_2d_joint, fit_bare, fit_g0_law, fit_thermometry, get_model, synthesize
from cqedsim.records import ComplexTrace, Map2D
from cqedsim.resonator import (MEASURED_KAPPAS, EnvironmentParams, ResonatorParams, TRIVIAL_ENV,
                               s21_bare, vacuum_voltage)
from cqedsim.wigner import (ConfinementModel, GridSpec, anisotropy_sweep, separable_levels,
                            solve_relative)

A10 = {}


def _dips(f, z):
    """Local minima of |z|^2, deepest first, returned in frequency order."""
    p = np.abs(z) ** 2
    k = np.where((p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:]))[0] + 1
    return np.sort(f[k[np.argsort(p[k])][:2]])


def _zero_crossings(x, y):
    i = np.where(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    return x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])


# --- A1 -----------------------------------------------------------------------

def test_a1_cooperativity(verdict):
    c1 = cooperativity(165e6, 19e6, 57e6)
    c2 = cooperativity(260e6, 63e6, 192e6)
    ok = abs(c1 - 100.6) <= 0.1 and round(c2, 1) == 22.4 and abs(c1 - 100) / 100 < 0.05 \
        and abs(c2 - 23) / 23 < 0.05
    verdict("A1", ok, f"C = {c1:.2f} (100.6 +/- 0.1, ~100) and {c2:.2f} (22.4, ~23)")
    assert ok


# --- A2 -----------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="with kappa = 19 MHz and Gamma = 57 MHz the transmission dips "
                   "sit about 3% inside 2 g0; see the decisions ledger")
def test_a2_vacuum_rabi_map(verdict):
    t0 = time.perf_counter()
    preset = datio.load_preset("cq_eps_sweep")
    p, env, q = datio.charge_qubit_from_preset(preset)
    g0 = q.g0
    eps_res = np.sqrt(p.f_r ** 2 - (2 * q.t_c) ** 2)  # f_q = f_r
    eps = np.linspace(-1e9, 1e9, 201)
    f = np.linspace(p.f_r - 0.4e9, p.f_r + 0.4e9, 401)
    df = f[1] - f[0]
    M = s21_map(p, env, q, eps, f)
    split = np.array([np.ptp(_dips(f, row)) if len(_dips(f, row)) == 2 else np.inf for row in M])
    min_split = split.min()
    # the resonant row itself, on the same frequency grid
    q_res = ChargeQubitParams(eps_res, q.t_c, g0, q.Gamma0, q.Gamma_eps)
    fd = _dips(f, s21_coupled(p, env, q_res, f))
    res_split = fd[1] - fd[0]
    # 2x2 non-Hermitian oracle at f_q = f_r
    H = np.array([[p.f_r - 0.5j * p.kappa, g0], [g0, qubit_frequency(q_res) - 1j * q.Gamma0]])
    ev = np.sort(np.linalg.eigvals(H).real)
    oracle_split = ev[1] - ev[0]
    runtime = time.perf_counter() - t0

    target = 2 * g0
    tol = max(0.02 * target, df)
    ok_target = abs(res_split - target) <= tol and abs(min_split - target) <= tol
    ok_oracle = np.all(np.abs(fd - ev) <= tol)
    ok = ok_target and ok_oracle and runtime < 5
    verdict("A2", ok, f"dip splitting at f_q = f_r {res_split / 1e6:.1f} MHz, minimum over the map "
            f"{min_split / 1e6:.1f} MHz vs 2 g0 = {target / 1e6:.0f} MHz (tol {tol / 1e6:.1f} MHz); "
            f"2x2 oracle poles split {oracle_split / 1e6:.1f} MHz, dips vs poles "
            f"{np.max(np.abs(fd - ev)) / 1e6:.1f} MHz ({'ok' if ok_oracle else 'off'}); {runtime:.2f} s")
    assert ok


# --- A3 -----------------------------------------------------------------------

def test_a3_joint_fit_round_trip(verdict):
    t0 = time.perf_counter()
    preset = datio.load_preset("cq_five_maps")
    sh = preset["shared"]
    v = np.linspace(-0.7e-3, 0.7e-3, 201)
    maps, resonators, per_map = [], [], []
    for i, m in enumerate(preset["maps"]):
        rp = ResonatorParams(m["f_r"], m["kappa"] - m["kappa_ext"], m["kappa_ext"], 0.0)
        env = EnvironmentParams()
        f = np.linspace(m["f_r"] - 0.4e9, m["f_r"] + 0.4e9, 401)
        V, F = np.meshgrid(v, f, indexing="ij")
        truth = {"f_r": rp.f_r, "kappa_int": rp.kappa_int, "kappa_ext": rp.kappa_ext_mag, "phi": 0.0,
                 "a": 1.0, "alpha": 0.0, "tau": 0.0, "g0": m["g0"], "V_pL0": 0.0, **sh}
        ds = synthesize("two-level", truth, {"v": V, "f": F}, sigma=0.01, seed=100 + i)
        maps.append(Map2D(v, f, ds.data.reshape(V.shape), "V", "Hz", {"f_r": m["f_r"]}))
        resonators.append((rp, env))
        per_map.append({"g0": 0.95 * m["g0"], "V_pL0": 2e-5})
    init = {"t_c": 1.05 * sh["t_c"], "beta_pL": 1.03 * sh["beta_pL"], "Gamma0": 1.2 * sh["Gamma0"],
            "Gamma_eps": 0.8 * sh["Gamma_eps"]}
    res = fit_2d_joint(maps, resonators, init, per_map)
    runtime = time.perf_counter() - t0

    t_err = res.values["t_c"] / sh["t_c"] - 1
    fr = np.array([m["f_r"] for m in preset["maps"]])
    g_true = np.array([m["g0"] for m in preset["maps"]])
    labels = [f"{x / 1e9:.4f}GHz" for x in fr]
    g_fit = np.array([res.values[f"g0@{l}"] for l in labels])
    g_s2 = np.array([res.sigma2[f"g0@{l}"] for l in labels])
    g_ok = np.abs(g_fit - g_true) <= g_s2
    law_fit = fit_g0_law(fr, g_fit, g_s2)
    law_true = fit_g0_law(fr, g_true, g_s2)
    a_fit, a_s2 = law_fit.values["scale_a"], law_fit.sigma2["scale_a"]
    a_true = law_true.values["scale_a"]
    ok = (res.status == "converged" and abs(t_err) < 0.01 and g_ok.all()
          and abs(a_fit - a_true) <= a_s2 and runtime < 120)
    verdict("A3", ok, f"t_c = {res.values['t_c'] / 1e9:.4f} GHz ({100 * t_err:+.3f}%), g0 within 2 sigma "
            f"{int(g_ok.sum())}/5 (max |dev|/2sigma {np.max(np.abs(g_fit - g_true) / g_s2):.2f}), "
            f"g0 law slope {a_fit:.2f} vs {a_true:.2f} +/- {a_s2:.2f}; {runtime:.1f} s")
    assert ok


# --- A4 -----------------------------------------------------------------------

def test_a4_multilevel_spectra(verdict):
    t0 = time.perf_counter()
    preset = datio.load_preset("fig5_odd")
    s, n = datio.scs_from_preset(preset)
    # far detuned, dE1 drifts by (1 - eta)|eps|/2 above the left (eps < 0) or right (eps > 0) exchange gap
    far = 200e9
    asym_L = excitation_spectra_at(s, -far)[0] - (1 - s.eta_L) * far / 2
    asym_R = excitation_spectra_at(s, far)[0] - (1 - s.eta_R) * far / 2
    asym_ok = abs(asym_L / s.Delta_L - 1) < 0.01 and abs(asym_R / s.Delta_R - 1) < 0.01

    fine = np.linspace(-10e9, 10e9, 20001)
    dE = ml.excitation_spectra(s, fine)
    eps = np.linspace(-10e9, 10e9, 201)
    rows, ok_cross = [], True
    for fr in preset["f_r"]:
        p = MEASURED_KAPPAS.at(fr)
        f = np.linspace(fr - 0.4e9, fr + 0.4e9, 401)
        P = np.abs(ml.s21_multilevel_map(p, EnvironmentParams(), s, n, eps, f)) ** 2
        # avoided crossing: the two dressed branches either side of f_r are equally deep
        balance = (1 - P[:, f > fr].min(axis=1)) - (1 - P[:, f < fr].min(axis=1))
        seen = list(_zero_crossings(eps, balance))
        for k in range(3):
            slope = np.gradient(dE[k], fine)
            for e0 in _zero_crossings(fine, dE[k] - fr):
                if abs(e0) > eps[-1]:
                    continue
                width = ml.build_spectrum(s.at(e0), n).gamma[k + 1, 0] / abs(np.interp(e0, fine, slope))
                near = [x for x in seen if abs(x - e0) <= width]
                ok_cross &= bool(near)
                if near:
                    seen.remove(min(near, key=lambda x: abs(x - e0)))
                rows.append(f"{fr / 1e9:.2f} GHz dE{k + 1}: {e0 / 1e9:+.3f} vs map "
                            f"{(min(near, key=lambda x: abs(x - e0)) / 1e9 if near else float('nan')):+.3f} "
                            f"(width {width / 1e9:.3f})")
        for x in seen:
            # extra balanced pairs are reported, not scored: a branch passing close to f_r
            sp = ml.build_spectrum(s.at(x), n)
            gap = [abs(sp.energies[k] - sp.energies[0] - fr) / sp.gamma[k, 0] for k in (1, 2, 3)]
            rows.append(f"{fr / 1e9:.2f} GHz extra feature at {x / 1e9:+.3f} GHz: dE{int(np.argmin(gap)) + 1} "
                        f"passes {min(gap):.2f} linewidths from f_r")
        if not any(r.startswith(f"{fr / 1e9:.2f}") for r in rows):
            rows.append(f"{fr / 1e9:.2f} GHz: no resonance (dE1 min {dE[0].min() / 1e9:.3f} GHz) and "
                        "no crossing in the map")
    runtime = time.perf_counter() - t0
    ok = asym_ok and ok_cross and runtime < 30
    verdict("A4", ok, f"asymptotes {asym_L / 1e9:.4f} / {asym_R / 1e9:.4f} GHz vs 5.40 / 4.73; "
            + "; ".join(rows) + f"; {runtime:.1f} s")
    assert ok


def excitation_spectra_at(s, e):
    return [float(x[0]) for x in ml.excitation_spectra(s, [e])]


# --- A5 -----------------------------------------------------------------------

def test_a5_two_level_limit(verdict):
    t0 = time.perf_counter()
    p = ResonatorParams(4.149e9, 11e6, 8e6, 0.1)
    env = EnvironmentParams(0.9, 0.3, 2e-9)
    t, g0 = 2.072e9, 165e6
    eps = np.linspace(-6e9, 6e9, 201)
    f = np.linspace(3.75e9, 4.55e9, 401)
    A = s21_map(p, env, ChargeQubitParams(0.0, t, g0, 0.0, 164e6), eps, f)
    # (0,1)/(1,0) doublet isolated: excited dot orbitals 100 GHz away, no cross tunnelling
    s = ml.ScsParams(0.0, 100e9, 100e9, t, 0, 0, 0, g0=g0)
    n = ml.NoiseRates(164e6, {c: 1e6 for c in ml.CHANNELS if c != "13"})
    B = ml.s21_multilevel_map(p, env, s, n, eps, f)
    err = np.max(np.abs(A - B) / np.abs(A))
    runtime = time.perf_counter() - t0
    ok = err < 1e-6 and runtime < 10
    verdict("A5", ok, f"max relative difference {err:.2e} over 201 x 401 (< 1e-6); {runtime:.1f} s")
    assert ok


# --- A6 -----------------------------------------------------------------------

def test_a6_linewidth_asymmetry(verdict):
    t0 = time.perf_counter()
    preset = datio.load_preset("fig5_odd")
    s, n = datio.scs_from_preset(preset)
    spec = ml.build_spectrum(s.at(-2.5e9), n)
    E = spec.energies - spec.energies[0]
    g01, g02 = spec.gamma[1, 0], spec.gamma[2, 0]
    p = MEASURED_KAPPAS.at(5.65e9)
    f = np.linspace(E[2] - 8 * g02, E[2] + 8 * g02, 801)
    z = ml.s21_multilevel(p, EnvironmentParams(), spec, s.g0, f)
    r = ml.linewidth_extract(ComplexTrace(f, z))
    hwhm = r["fwhm"] / 2
    runtime = time.perf_counter() - t0
    ok = abs(hwhm / g02 - 1) < 0.05 and g02 < g01 and runtime < 10
    verdict("A6", ok, f"extracted half width {hwhm / 1e6:.2f} MHz vs gamma_02 {g02 / 1e6:.2f} MHz "
            f"({100 * (hwhm / g02 - 1):+.2f}%); gamma_02 < gamma_01 = {g01 / 1e6:.1f} MHz; {runtime:.2f} s")
    assert ok


# --- A7 -----------------------------------------------------------------------

def test_a7_wigner(verdict):
    timings = []
    t0 = time.perf_counter()
    free = solve_relative(ConfinementModel(70e9, 0.0, 1.0), n_levels=6)
    timings.append(time.perf_counter() - t0)
    err_a = np.max(np.abs(free.levels - np.array([1, 2, 2, 3, 3, 3])))
    t0 = time.perf_counter()
    inter = solve_relative(ConfinementModel(70e9, 4.46, 1.0), n_levels=8)
    timings.append(time.perf_counter() - t0)
    gap = inter.delta_ST
    t0 = time.perf_counter()
    sweep = anisotropy_sweep(4.46, np.round(np.arange(0.70, 1.0001, 0.05), 2), band=(4e9, 8e9))
    timings.append((time.perf_counter() - t0) / len(sweep.alphas))
    a_in = sweep.first_in_band
    a_edge = sweep.crossing(8e9)
    ok_a = err_a < 1e-3
    ok_b = abs(gap - 0.2) <= 0.15 * 0.2
    ok_c = a_in is not None and abs(a_in - 0.8) <= 0.05 + 1e-12
    ok = ok_a and ok_b and ok_c and max(timings) < 120
    verdict("A7", ok, f"(a) max |E - {{1,2,2,3,3,3}}| = {err_a:.1e}; (b) Delta_ST = {gap:.4f} hbar omega = "
            f"{inter.delta_ST_hz / 1e9:.2f} GHz; (c) first in-band alpha on the 0.05 grid = {a_in} "
            f"(interpolated band entry {a_edge:.3f}); slowest solve {max(timings):.1f} s")
    assert ok


# --- A8 -----------------------------------------------------------------------

def test_a8_thermometry(verdict):
    lever = 0.08  # eV/V gate lever arm
    v = np.linspace(-3e-3, 3e-3, 301)
    ds = synthesize("coulomb-peak", {"Gmax": 1.0, "V0": 2e-4, "T_e": 0.078, "c": 0.02, "lever": lever},
                    {"v": v}, sigma=0.01, seed=11)
    out = fit_thermometry(v, ds.data, lever)
    ok = abs(out["T_e"] - 0.078) < 0.002
    verdict("A8", ok, f"T_e = {1e3 * out['T_e']:.2f} mK +/- {1e3 * out['sigma2']['T_e']:.2f} (2 sigma) "
            "vs 78 mK (tol 2 mK)")
    assert ok


# --- A9 -----------------------------------------------------------------------

def test_a9_vacuum_voltage_chain(verdict):
    v1, v2 = vacuum_voltage(4.149e9, 1.6e3), vacuum_voltage(5.432e9, 1.2e3)
    b1, b2 = resonator_lever_arm(165e6, v1), resonator_lever_arm(260e6, v2)
    rel = [v1 / 7.6e-6 - 1, v2 / 8.7e-6 - 1, b1 / 0.18 - 1, b2 / 0.25 - 1]
    ok = max(abs(x) for x in rel) < 0.03
    verdict("A9", ok, f"V0,rms = {1e6 * v1:.2f} / {1e6 * v2:.2f} uV, beta_r = {b1:.3f} / {b2:.3f} eV/V "
            f"(max deviation {100 * max(abs(x) for x in rel):.2f}%, tol 3%)")
    assert ok


# --- A10 ----------------------------------------------------------------------

def _jacobian_check(rng):
    worst = 0.0
    for _ in range(10):
        f0 = rng.uniform(4.5e9, 5.5e9)
        res = {"f_r": f0, "kappa_int": rng.uniform(5e6, 50e6), "kappa_ext": rng.uniform(5e6, 50e6),
               "phi": rng.uniform(-1, 1), "a": rng.uniform(0.5, 2), "alpha": rng.uniform(-3, 3),
               "tau": rng.uniform(1e-9, 50e-9)}
        qb = {"t_c": rng.uniform(1.5e9, 2.8e9), "g0": rng.uniform(50e6, 250e6),
              "Gamma0": rng.uniform(10e6, 100e6), "Gamma_eps": rng.uniform(10e6, 200e6)}
        f = np.linspace(f0 - 0.3e9, f0 + 0.3e9, 31)
        E, F = np.meshgrid(np.linspace(-4e9, 4e9, 9) + 1e6, f, indexing="ij")
        cases = [("bare", res, {"f": f}),
                 ("two-level", {**res, **qb}, {"eps": E.ravel(), "f": F.ravel()}),
                 ("coulomb-peak", {"Gmax": rng.uniform(0.1, 2), "V0": rng.uniform(-1e-3, 1e-3),
                                   "T_e": rng.uniform(0.03, 0.3), "c": rng.uniform(-0.1, 0.1),
                                   "lever": rng.uniform(0.02, 0.1)}, {"v": np.linspace(-5e-3, 5e-3, 41)}),
                 ("g0-law", {"scale_a": rng.uniform(1e3, 3e3)}, {"f_r": np.linspace(4e9, 6e9, 7)})]
        for mid, p, coords in cases:
            model = get_model(mid)
            names = [k for k in model.param_names(coords) if k in p and k != "lever"]
            J = model.jacobian(coords, p, names)
            for k in names:
                h = 1e-6 * max(abs(p[k]), 1e-9 if k == "tau" else 1e-3)
                up, dn = dict(p), dict(p)
                up[k] += h
                dn[k] -= h
                col = (model.evaluate(coords, up) - model.evaluate(coords, dn)) / (2 * h)
                scale = max(np.linalg.norm(col), np.linalg.norm(J[k]), 1e-300)
                worst = max(worst, np.linalg.norm(J[k] - col) / scale)
    return worst


def _circle_check(rng):
    worst = 0.0
    for _ in range(20):
        ki, ke, phi = rng.uniform(0.5e6, 50e6), rng.uniform(0.5e6, 50e6), rng.uniform(-3, 3)
        p = ResonatorParams(5e9, ki, ke, phi)
        z = s21_bare(p, TRIVIAL_ENV, 5e9 + np.linspace(-20, 20, 801) * p.kappa)
        A = np.column_stack([z.real, z.imag, np.ones(z.size)])
        c, *_ = np.linalg.lstsq(A, np.abs(z) ** 2, rcond=None)
        xc, yc = c[0] / 2, c[1] / 2
        r = np.sqrt(c[2] + xc * xc + yc * yc)
        worst = max(worst, abs(2 * r / (ke / p.kappa) - 1),
                    np.max(np.abs(np.abs(z - (xc + 1j * yc)) - r)) / (2 * r))
    return worst


def _parity_check():
    spec = solve_relative(ConfinementModel(70e9, 0.0, 0.7), GridSpec(6.0, 160), n_levels=6)
    exact, par = separable_levels(0.7, 6)
    return bool(np.all(np.sign(spec.parities) == par) and np.max(np.abs(spec.levels - exact)) < 5e-3)


def _determinism_check(tmp_path):
    grid = GridSpec(6.0, 96)
    serial = anisotropy_sweep(2.0, [0.8, 1.0], grid, n_levels=4)
    pooled = anisotropy_sweep(2.0, [0.8, 1.0], grid, n_levels=4, workers=2)
    same_sweep = all(np.array_equal(a.levels, b.levels) for a, b in zip(serial.spectra, pooled.spectra))
    q = ChargeQubitParams(0.0, 2.072e9, 165e6, 57e6)
    f = np.linspace(4.0e9, 4.3e9, 31)
    m = Map2D(np.linspace(-1e9, 1e9, 5), f, s21_map(ResonatorParams(4.149e9, 11e6, 8e6), TRIVIAL_ENV, q,
                                                    np.linspace(-1e9, 1e9, 5), f), "Hz", "Hz")
    datio.write_map(tmp_path / "a", m)
    datio.write_map(tmp_path / "b", m)
    same_hash = datio.read_sidecar(tmp_path / "a")["data_hash"] == datio.read_sidecar(tmp_path / "b")["data_hash"]
    ok_verify = datio.verify(tmp_path / "a") is True
    re = tmp_path / "b.re.csv"
    re.write_text(re.read_text().replace(",4", ",5", 1))
    tamper = datio.verify(tmp_path / "b") is False
    return same_sweep and same_hash and ok_verify and tamper


def _coverage_check():
    truth = {"f_r": 5.109e9, "kappa_int": 10e6, "kappa_ext": 29e6, "phi": 0.1, "a": 0.8, "alpha": 0.3,
             "tau": 2e-9}
    f = np.linspace(truth["f_r"] - 390e6, truth["f_r"] + 390e6, 201)
    hits = {k: 0 for k in truth}
    for seed in range(200):
        ds = synthesize("bare", truth, {"f": f}, sigma=0.01, seed=seed)
        res = fit_bare(ComplexTrace(f, ds.data))
        for k in truth:
            hits[k] += abs(res.values[k] - truth[k]) <= res.sigma2[k]
    return min(hits.values()) / 200


def test_a10_property_suites(tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    A10["jacobian"] = _jacobian_check(rng)
    A10["circle"] = _circle_check(rng)
    A10["parity"] = _parity_check()
    A10["determinism"] = _determinism_check(tmp_path)
    A10["coverage"] = _coverage_check()
    A10["runtime"] = time.perf_counter() - t0
    assert A10["jacobian"] < 1e-5
    assert A10["circle"] < 1e-9
    assert A10["parity"] and A10["determinism"]
    assert A10["coverage"] >= 0.90


@pytest.mark.xfail(strict=True, reason="the 5-point finite-difference Laplacian converges from below, so "
                   "levels are not variational upper bounds; see the decisions ledger")
def test_a10_variational_and_verdict(verdict):
    t0 = time.perf_counter()
    e = [solve_relative(ConfinementModel(70e9, 4.46, 1.0), GridSpec(6.0, n, 0.02), n_levels=2).levels[0]
         for n in (96, 128, 192)]
    monotone = bool(np.all(np.diff(e) <= 0))
    runtime = A10.get("runtime", np.nan) + time.perf_counter() - t0
    subs_ok = (A10.get("jacobian", 1) < 1e-5 and A10.get("circle", 1) < 1e-9 and A10.get("parity", False)
               and A10.get("determinism", False) and A10.get("coverage", 0) >= 0.90)
    ok = subs_ok and monotone and runtime < 600
    verdict("A10", ok, f"Jacobian vs FD {A10.get('jacobian', np.nan):.1e}, circle fit "
            f"{A10.get('circle', np.nan):.1e}, parity {A10.get('parity')}, determinism/hash "
            f"{A10.get('determinism')}, 2-sigma coverage {100 * A10.get('coverage', np.nan):.1f}%; "
            f"variational monotonicity {'holds' if monotone else 'violated'} "
            f"(E0 = {', '.join(f'{x:.5f}' for x in e)} for N = 96, 128, 192); {runtime:.0f} s")
    assert ok
