"""Five plunger-voltage maps fitted together with a shared tunnel coupling.

Synthesises the maps with 1% noise, runs the joint fit and checks the
per-map couplings against the square-root frequency law.
"""
import numpy as np

from cqedsim import datio
from cqedsim.fitkit import fit_2d_joint, fit_g0_law, synthesize
from cqedsim.records import Map2D
from cqedsim.resonator import EnvironmentParams, ResonatorParams

preset = datio.load_preset("cq_five_maps")
sh = preset["shared"]
v = np.linspace(-0.7e-3, 0.7e-3, 201)
maps, resonators, per_map = [], [], []
for i, m in enumerate(preset["maps"]):
    rp = ResonatorParams(m["f_r"], m["kappa"] - m["kappa_ext"], m["kappa_ext"])
    f = np.linspace(m["f_r"] - 0.4e9, m["f_r"] + 0.4e9, 401)
    V, F = np.meshgrid(v, f, indexing="ij")
    truth = {"f_r": rp.f_r, "kappa_int": rp.kappa_int, "kappa_ext": rp.kappa_ext_mag, "phi": 0.0,
             "a": 1.0, "alpha": 0.0, "tau": 0.0, "g0": m["g0"], "V_pL0": 0.0, **sh}
    ds = synthesize("two-level", truth, {"v": V, "f": F}, sigma=0.01, seed=100 + i)
    maps.append(Map2D(v, f, ds.data.reshape(V.shape), "V", "Hz", {"f_r": m["f_r"]}))
    resonators.append((rp, EnvironmentParams()))
    per_map.append({"g0": 140e6, "V_pL0": 0.0})

res = fit_2d_joint(maps, resonators, {"t_c": 2.2e9, "beta_pL": 0.025, "Gamma0": 70e6, "Gamma_eps": 130e6},
                   per_map)
print(f"{res.status} after {res.iterations} iterations")
for k in ("t_c", "beta_pL", "Gamma0", "Gamma_eps"):
    print(f"{k:>10s} = {res.values[k]:.6g} +/- {res.sigma2[k]:.2g}  (true {sh[k]:.6g})")
fr = np.array([m["f_r"] for m in preset["maps"]])
g0 = np.array([res.values[f"g0@{x / 1e9:.4f}GHz"] for x in fr])
s2 = np.array([res.sigma2[f"g0@{x / 1e9:.4f}GHz"] for x in fr])
law = fit_g0_law(fr, g0, s2)
for x, g, e in zip(fr, g0, s2):
    print(f"f_r = {x / 1e9:.3f} GHz: g0 = {g / 1e6:.2f} +/- {e / 1e6:.2f} MHz")
print(f"g0 = a sqrt(f_r): a = {law.values['scale_a']:.1f} +/- {law.sigma2['scale_a']:.1f} Hz^0.5")
