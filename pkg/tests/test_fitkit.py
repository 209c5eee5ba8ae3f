import json

import numpy as np
import pytest
from scipy.optimize import least_squares

from cqedsim.errors import FitError, NoFeatureError, SingularJacobianError
from cqedsim.fitkit import (Dataset, FitProblem, Parameter, coulomb_peak_fwhm, fit, fit_bare,
                            fit_g0_law, fit_thermometry, get_model, synthesize)
from cqedsim.fitkit.engine import _Evaluator
from cqedsim.fitkit.io import load_problem, result_document, run_problem
from cqedsim.fitkit.models import MultilevelModel
from cqedsim.records import ComplexTrace

BARE = {"f_r": 5.109e9, "kappa_int": 10e6, "kappa_ext": 29e6, "phi": 0.1, "a": 0.8,
        "alpha": 0.3, "tau": 2e-9}
QUBIT = {"t_c": 2.072e9, "g0": 165e6, "Gamma0": 57e6, "Gamma_eps": 0.0}
RES_Q = {"f_r": 4.149e9, "kappa_int": 11e6, "kappa_ext": 8e6, "phi": 0.0, "a": 1.0,
         "alpha": 0.0, "tau": 0.0}


def bare_f(n=201, p=BARE):
    k = p["kappa_int"] + p["kappa_ext"]
    return np.linspace(p["f_r"] - 10 * k, p["f_r"] + 10 * k, n)


def _random_case(model, rng):
    f0 = rng.uniform(4.5e9, 5.5e9)
    res = {"f_r": f0, "kappa_int": rng.uniform(5e6, 50e6), "kappa_ext": rng.uniform(5e6, 50e6),
           "phi": rng.uniform(-1, 1), "a": rng.uniform(0.5, 2), "alpha": rng.uniform(-3, 3),
           "tau": rng.uniform(1e-9, 50e-9)}
    f = np.linspace(f0 - 0.3e9, f0 + 0.3e9, 31)
    q = {"t_c": rng.uniform(1.5e9, 2.8e9), "g0": rng.uniform(50e6, 250e6),
         "Gamma0": rng.uniform(10e6, 100e6), "Gamma_eps": rng.uniform(10e6, 200e6)}
    if model == "bare":
        return res, {"f": f}
    if model == "two-level-eps":
        E, F = np.meshgrid(np.linspace(-4e9, 4e9, 9) + 1e6, f, indexing="ij")
        return {**res, **q}, {"eps": E, "f": F}
    if model == "two-level-v":
        V, F = np.meshgrid(np.linspace(-1e-3, 1e-3, 9) + 1e-6, f, indexing="ij")
        return {**res, **q, "beta_pL": rng.uniform(0.01, 0.04), "V_pL0": rng.uniform(-2e-4, 2e-4)}, \
            {"v": V, "f": F}
    if model == "two-level-param":
        return {**res, **q, "eps": rng.uniform(0.5e9, 3e9) * rng.choice([-1, 1])}, {"f": f}
    if model == "coulomb-peak":
        return {"Gmax": rng.uniform(0.1, 2), "V0": rng.uniform(-1e-3, 1e-3), "T_e": rng.uniform(0.03, 0.3),
                "c": rng.uniform(-0.1, 0.1), "lever": rng.uniform(0.02, 0.1)}, \
            {"v": np.linspace(-5e-3, 5e-3, 41)}
    if model == "g0-law":
        return {"scale_a": rng.uniform(1e3, 3e3)}, {"f_r": np.linspace(4e9, 6e9, 7)}
    raise KeyError(model)


def _engine_vs_fd(model_id, p, coords):
    mid = "two-level" if model_id.startswith("two-level") else model_id
    ds = Dataset(mid, coords, np.zeros(np.asarray(next(iter(coords.values()))).size))
    params = [Parameter(n, v) for n, v in p.items()]
    names = sorted(ds.model.param_names(ds.coords))
    ev = _Evaluator(FitProblem([ds], params), names)
    u = np.array([p[n] for n in names]) / ev.scale
    J = ev.jacobian(u, np.full(u.size, -np.inf), np.full(u.size, np.inf))
    for k, n in enumerate(names):
        h = 1e-6
        up, dn = u.copy(), u.copy()
        up[k] += h
        dn[k] -= h
        col = (ev.residuals(up) - ev.residuals(dn)) / (2 * h)
        scale = max(np.linalg.norm(col), np.linalg.norm(J[:, k]), 1e-300)
        assert np.linalg.norm(J[:, k] - col) / scale < 1e-5, (model_id, n)


@pytest.mark.parametrize("model_id", ["bare", "two-level-eps", "two-level-v", "two-level-param",
                                      "coulomb-peak", "g0-law"])
def test_jacobian_vs_finite_differences(model_id):
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, coords = _random_case(model_id, rng)
        _engine_vs_fd(model_id, p, coords)


def test_multilevel_jacobian_is_differenced():
    # no analytic Jacobian: the engine's difference column must agree with a central difference
    assert MultilevelModel().jacobian is None
    p = dict(BARE, f_r=5.18e9, Delta_L=5.4e9, Delta_R=4.73e9, t11=2.49e9, t12=0.21e9, t21=0.11e9,
             t22=1.69e9, eta_L=0.92, eta_R=0.913, g0=220e6, Gamma_eps=180e6, G12=1e6, G34=1e6,
             G13=1e6, G14=1e6, G24=30e6, G23=1e6, T=0.01, tau=0.0)
    E, F = np.meshgrid([-2e9, 1e9], np.linspace(5.0e9, 5.4e9, 21), indexing="ij")
    ds = Dataset("multilevel", {"eps": E, "f": F}, np.zeros(E.size))
    names = ["t11", "g0", "Gamma_eps"]
    ev = _Evaluator(FitProblem([ds], [Parameter(n, v) for n, v in p.items()]), names)
    u = np.ones(3)
    J = ev.jacobian(u, np.full(3, -np.inf), np.full(3, np.inf))
    for k in range(3):
        h = 1e-5
        up, dn = u.copy(), u.copy()
        up[k] += h
        dn[k] -= h
        col = (ev.residuals(up) - ev.residuals(dn)) / (2 * h)
        assert np.linalg.norm(J[:, k] - col) / np.linalg.norm(col) < 1e-5


def test_zero_noise_bare_round_trip():
    f = bare_f()
    ds = synthesize("bare", BARE, {"f": f})
    assert np.array_equal(ds.data, get_model("bare").evaluate(ds.coords, BARE))
    res = fit_bare(ComplexTrace(f, ds.data))
    assert res.status == "converged"
    for n in res.free:
        assert res.values[n] == pytest.approx(BARE[n], rel=1e-6)


def test_diverging_fit_reported():
    ds = synthesize("bare", BARE, {"f": bare_f()})
    res = fit(FitProblem([ds], [Parameter(n, v * 1.03) for n, v in BARE.items()]))
    assert res.status != "converged"


@pytest.mark.parametrize("model_id,p,coords", [
    ("coulomb-peak", {"Gmax": 1.0, "V0": 1e-4, "T_e": 0.078, "c": 0.05, "lever": 0.08},
     {"v": np.linspace(-4e-3, 4e-3, 81)}),
    ("g0-law", {"scale_a": 2400.0}, {"f_r": np.linspace(4e9, 5e9, 5)}),
])
def test_zero_noise_round_trip(model_id, p, coords):
    ds = synthesize(model_id, p, coords)
    assert np.array_equal(ds.data, get_model(model_id).evaluate(ds.coords, p))
    fixed = {"lever"}
    params = [Parameter(n, v * (1.0 if n in fixed else 1.03) + (0.01 if v == 0 else 0.0),
                        fixed=n in fixed) for n, v in p.items()]
    res = fit(FitProblem([ds], params))
    assert res.status == "converged"
    for n in res.free:
        assert res.values[n] == pytest.approx(p[n], rel=1e-6, abs=1e-12)


def test_zero_noise_two_level_round_trip():
    E, F = np.meshgrid(np.linspace(-4e9, 4e9, 31), np.linspace(3.9e9, 4.4e9, 101), indexing="ij")
    truth = {**RES_Q, **QUBIT}
    ds = synthesize("two-level", truth, {"eps": E, "f": F}, binding=RES_Q)
    params = [Parameter("t_c", 2.0e9, 0, np.inf), Parameter("g0", 150e6, 0, np.inf),
              Parameter("Gamma0", 70e6, 0, np.inf), Parameter("Gamma_eps", 0.0, fixed=True)]
    res = fit(FitProblem([ds], params))
    for n in ("t_c", "g0", "Gamma0"):
        assert res.values[n] == pytest.approx(truth[n], rel=1e-6)


def test_exact_start_converges_immediately():
    ds = synthesize("bare", BARE, {"f": bare_f()})
    res = fit(FitProblem([ds], [Parameter(n, v) for n, v in BARE.items()]))
    assert res.status == "converged" and res.iterations <= 1
    assert res.cost < 1e-18 * np.sum(np.abs(ds.data) ** 2)


def test_two_level_noisy_round_trip():
    E, F = np.meshgrid(np.linspace(-4e9, 4e9, 61), np.linspace(3.9e9, 4.4e9, 101), indexing="ij")
    truth = {**RES_Q, **QUBIT}
    ds = synthesize("two-level", truth, {"eps": E, "f": F}, sigma=0.01, seed=3, binding=RES_Q)
    params = [Parameter("t_c", 2.0e9, 0, np.inf), Parameter("g0", 150e6, 0, np.inf),
              Parameter("Gamma0", 70e6, 0, np.inf), Parameter("Gamma_eps", 0.0, fixed=True)]
    res = fit(FitProblem([ds], params))
    assert res.status == "converged"
    for n in ("t_c", "g0", "Gamma0"):
        assert abs(res.values[n] - truth[n]) <= res.sigma2[n]
    assert res.sigma2["g0"] < 5e6


def test_joint_line_cuts_share_t_c():
    # epsilon sweeps at f_d = f_r for resonators below, at and above 2 t_c
    t_c, G0 = 2.072e9, 57e6
    eps = np.linspace(-6e9, 6e9, 241)
    datasets, params = [], []
    for i, (fr, g0) in enumerate([(3.9e9, 155e6), (4.144e9, 160e6), (4.6e9, 170e6)]):
        res = dict(RES_Q, f_r=fr)
        truth = {**res, **QUBIT, "t_c": t_c, "g0": g0}
        ds = synthesize("two-level", truth, {"eps": eps, "f": np.full(eps.size, fr)}, sigma=0.01,
                        seed=10 + i, binding={**res, "g0": f"g0_{i}"}, name=f"cut{i}")
        datasets.append(ds)
        params.append(Parameter(f"g0_{i}", 140e6, 0, np.inf))
    params += [Parameter("t_c", 2.2e9, 0, np.inf, shared=True), Parameter("Gamma0", 80e6, 0, np.inf,
                                                                          shared=True),
               Parameter("Gamma_eps", 0.0, fixed=True)]
    res = fit(FitProblem(datasets, params))
    assert res.values["t_c"] == pytest.approx(t_c, rel=0.01)


def test_bare_fit_examples():
    f = bare_f(401)
    ds = synthesize("bare", BARE, {"f": f}, sigma=0.005, seed=1)
    res = fit_bare(ComplexTrace(f, ds.data))
    for n in ("f_r", "kappa_int", "kappa_ext"):
        assert res.values[n] == pytest.approx(BARE[n], rel=0.01)
    # electrical delay: only tau moves
    p50 = dict(BARE, tau=50e-9)
    ds50 = synthesize("bare", p50, {"f": f}, sigma=0.005, seed=1)
    r50 = fit_bare(ComplexTrace(f, ds50.data))
    assert r50.values["tau"] == pytest.approx(50e-9, rel=0.01)
    for n in ("f_r", "kappa_int", "kappa_ext", "phi", "a"):
        assert abs(r50.values[n] - res.values[n]) <= res.sigma2[n] + r50.sigma2[n]


def test_invisible_resonator_is_singular():
    f = bare_f()
    ds = synthesize("bare", dict(BARE, kappa_ext=0.0), {"f": f})
    with pytest.raises(SingularJacobianError) as e:
        fit_bare(ComplexTrace(f, ds.data), init={"kappa_ext": 0.0})
    assert "f_r" in e.value.params
    res = fit_bare(ComplexTrace(f, ds.data), init={"kappa_ext": 0.0}, freeze_unidentifiable=True)
    assert "f_r" in res.frozen and res.status == "singular"


def test_amplitude_scale_invariance():
    f = bare_f()
    ds = synthesize("bare", BARE, {"f": f}, sigma=0.01, seed=5)
    r1 = fit_bare(ComplexTrace(f, ds.data))
    r2 = fit_bare(ComplexTrace(f, 3.7 * ds.data))
    assert r2.values["a"] == pytest.approx(3.7 * r1.values["a"], rel=1e-7)
    for n in ("f_r", "kappa_int", "kappa_ext", "phi", "alpha", "tau"):
        assert r2.values[n] == pytest.approx(r1.values[n], rel=1e-7, abs=1e-6 * r1.sigma2[n])


def test_cost_monotone():
    f = bare_f()
    ds = synthesize("bare", BARE, {"f": f}, sigma=0.02, seed=9)
    res = fit_bare(ComplexTrace(f, ds.data), init={"f_r": BARE["f_r"] + 15e6, "kappa_int": 30e6})
    assert res.iterations > 1
    assert np.all(np.diff(res.cost_history) <= 0)


def test_covariance_coverage():
    f = bare_f()
    hits = {n: 0 for n in BARE}
    trials = 200
    for seed in range(trials):
        ds = synthesize("bare", BARE, {"f": f}, sigma=0.01, seed=seed)
        res = fit_bare(ComplexTrace(f, ds.data))
        for n in BARE:
            hits[n] += abs(res.values[n] - BARE[n]) <= res.sigma2[n]
    assert min(hits.values()) / trials >= 0.90, hits


def test_cross_check_scipy():
    f = bare_f()
    ds = synthesize("bare", BARE, {"f": f}, sigma=0.01, seed=2)
    res = fit_bare(ComplexTrace(f, ds.data))
    names = list(BARE)
    x0 = np.array([res.values[n] for n in names]) * 1.001
    scale = np.array([BARE[n] if BARE[n] else 1.0 for n in names])
    model = get_model("bare")

    def resid(x):
        z = model.evaluate({"f": f}, dict(zip(names, x * scale))) - ds.data
        return np.concatenate([z.real, z.imag])

    sol = least_squares(resid, x0 / scale, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    for k, n in enumerate(names):
        assert sol.x[k] * scale[k] == pytest.approx(res.values[n], abs=1e-3 * res.sigma2[n])


def test_synthesize_determinism():
    a = synthesize("bare", BARE, {"f": bare_f()}, sigma=0.01, seed=42)
    b = synthesize("bare", BARE, {"f": bare_f()}, sigma=0.01, seed=42)
    c = synthesize("bare", BARE, {"f": bare_f()}, sigma=0.01, seed=43)
    assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)
    assert a.meta == {"generator": "bare", "params": BARE, "sigma": 0.01, "seed": 42}


def test_permutation_bit_identical():
    d1 = synthesize("bare", BARE, {"f": bare_f()}, sigma=0.01, seed=1, name="a")
    d2 = synthesize("bare", dict(BARE, f_r=5.12e9), {"f": bare_f()}, sigma=0.01, seed=2, name="b",
                    binding={"f_r": "f_r_b"})
    params = [Parameter(n, v * 1.001) for n, v in BARE.items()] + [Parameter("f_r_b", 5.1205e9)]
    r1 = fit(FitProblem([d1, d2], params))
    r2 = fit(FitProblem([d2, d1], params[::-1]))
    assert r1.values == r2.values and np.array_equal(r1.covariance, r2.covariance)


def test_invalid_problems():
    ds = synthesize("bare", BARE, {"f": bare_f()})
    with pytest.raises(FitError):
        FitProblem([ds], [Parameter("f_r", 1.0)])  # most parameters unbound
    with pytest.raises(FitError):
        FitProblem([ds], [Parameter(n, v) for n, v in BARE.items()] + [Parameter("f_r", 1.0)])
    with pytest.raises(FitError):
        FitProblem([ds], [Parameter(n, v, shared=True) for n, v in BARE.items()])
    with pytest.raises(FitError):
        FitProblem([], [])


def test_max_iter_reported():
    ds = synthesize("bare", BARE, {"f": bare_f()}, sigma=0.01, seed=1)
    params = [Parameter(n, v * 1.01) for n, v in BARE.items()]
    res = fit(FitProblem([ds], params), max_iter=1)
    assert res.status == "max-iter" and "gradient" in res.message


def test_weights_absolute_sigma():
    f = bare_f()
    sigma = 0.01
    ds = synthesize("bare", BARE, {"f": f}, sigma=sigma, seed=4)
    ds.weights = np.full(f.size, 1 / sigma ** 2)
    r = fit(FitProblem([ds], [Parameter(n, v) for n, v in BARE.items()]))
    ds2 = synthesize("bare", BARE, {"f": f}, sigma=sigma, seed=4)
    r2 = fit(FitProblem([ds2], [Parameter(n, v) for n, v in BARE.items()]))
    # the scaled and the absolute covariance agree when the noise model is right
    assert r.sigma2["f_r"] == pytest.approx(r2.sigma2["f_r"], rel=0.2)


def test_g0_law_fit():
    fr = np.array([4.156, 4.389, 4.565, 4.747, 4.983]) * 1e9
    a = 155e6 / np.sqrt(4.156e9)
    res = fit_g0_law(fr, a * np.sqrt(fr), sigma2=np.full(5, 4e6))
    assert res.values["scale_a"] == pytest.approx(a, rel=1e-9)


def _peak(T, lever=0.08, G=1.0, c=0.02, V0=2e-4, sigma=0.0, seed=0):
    v = np.linspace(-3e-3, 3e-3, 301)
    ds = synthesize("coulomb-peak", {"Gmax": G, "V0": V0, "T_e": T, "c": c, "lever": lever},
                    {"v": v}, sigma=sigma, seed=seed)
    return v, ds.data


def test_thermometry_round_trip():
    v, G = _peak(0.078, sigma=0.01, seed=11)
    out = fit_thermometry(v, G, 0.08)
    assert abs(out["T_e"] - 0.078) < 0.002
    assert out["sigma2"]["T_e"] > 0


def test_thermometry_width_halves():
    w = []
    for T in (0.078, 0.039):
        v, G = _peak(T)
        out = fit_thermometry(v, G, 0.08)
        w.append(coulomb_peak_fwhm(out["T_e"], 0.08))
    assert w[1] == pytest.approx(w[0] / 2, rel=1e-6)
    # the closed-form width matches the sampled half-maximum crossing
    v = np.linspace(-3e-3, 3e-3, 600001)
    _, G = _peak(0.078, c=0.0, V0=0.0)
    G = get_model("coulomb-peak").evaluate({"v": v}, {"Gmax": 1, "V0": 0, "T_e": 0.078, "c": 0,
                                                      "lever": 0.08})
    above = v[G >= 0.5]
    assert above[-1] - above[0] == pytest.approx(coulomb_peak_fwhm(0.078, 0.08), rel=1e-4)


def test_thermometry_no_peak(rng):
    v = np.linspace(-3e-3, 3e-3, 301)
    with pytest.raises(NoFeatureError):
        fit_thermometry(v, 0.5 + 0.001 * rng.standard_normal(v.size), 0.08)
    with pytest.raises(NoFeatureError):
        fit_thermometry(v, np.tanh(v / 1e-3), 0.08)


def test_problem_io_round_trip(tmp_path):
    f = bare_f()
    ds = synthesize("bare", BARE, {"f": f}, sigma=0.01, seed=1)
    doc = {"schema": "cqedsim-fit/1",
           "params": [{"name": n, "value": v * 1.001} for n, v in BARE.items()],
           "datasets": [{"model": "bare", "name": "inline", "coords": {"f": f.tolist()},
                         "data": {"re": ds.data.real.tolist(), "im": ds.data.imag.tolist()}}]}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    res, ih, prov = run_problem(path)
    direct = fit(FitProblem([Dataset("bare", {"f": f}, ds.data, name="inline")],
                            [Parameter(n, v * 1.001) for n, v in BARE.items()]))
    assert res.values == direct.values
    out = result_document(res, ih, prov)
    assert out["schema"] == "cqedsim-fit/1" and out["input_hash"] == load_problem(path)[2]
    json.dumps(out)


def test_problem_io_errors(tmp_path):
    from cqedsim.errors import ConfigError
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"schema": "x", "params": [{"name": "a", "bogus": 1}],
                                "datasets": [{"path": "nope.csv"}]}))
    with pytest.raises(FileNotFoundError) as e:
        load_problem(path)
    assert "nope.csv" in str(e.value)
    path.write_text(json.dumps({"schema": "x", "params": [{"name": "a", "bogus": 1}],
                                "datasets": [{"model": "bare"}]}))
    with pytest.raises(ConfigError) as e:
        load_problem(path)
    assert len(e.value.problems) == 4
