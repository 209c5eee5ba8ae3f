"""Four-level strongly correlated state: spectra and resonator maps at three f_r.

Prints where the first excitation crosses each resonator frequency and
writes the maps (CSV + SVG) to ./demo_out.
"""
from pathlib import Path

import numpy as np

from cqedsim import datio, svg
from cqedsim import multilevel as ml
from cqedsim.records import Map2D
from cqedsim.resonator import MEASURED_KAPPAS, EnvironmentParams

out = Path("demo_out")
out.mkdir(exist_ok=True)
preset = datio.load_preset("fig5_odd")
s, n = datio.scs_from_preset(preset)

eps = np.linspace(-10e9, 10e9, 201)
d1, d2, d3 = ml.excitation_spectra(s, eps)
svg.line_plot(out / "spectra.svg", eps / 1e9, [d1 / 1e9, d2 / 1e9, d3 / 1e9], ["dE1", "dE2", "dE3"],
              xlabel="detuning (GHz)", ylabel="excitation (GHz)")
print(f"dE1 minimum {d1.min() / 1e9:.3f} GHz, dE2 minimum {d2.min() / 1e9:.3f} GHz")

for fr in preset["f_r"]:
    f = np.linspace(fr - 0.4e9, fr + 0.4e9, 401)
    z = ml.s21_multilevel_map(MEASURED_KAPPAS.at(fr), EnvironmentParams(), s, n, eps, f)
    name = f"fig5_odd_fr{fr / 1e9:.2f}GHz"
    datio.write_map(out / name, Map2D(eps, f, z, "Hz", "Hz", {"f_r": fr}))
    svg.heatmap(out / f"{name}.svg", eps / 1e9, f / 1e9, np.abs(z) ** 2, title=name,
                xlabel="detuning (GHz)", ylabel="f_d (GHz)")
    i = np.where(np.diff(np.sign(d1 - fr)) != 0)[0]
    where = ", ".join(f"{eps[k] / 1e9:+.2f}" for k in i) or "none"
    print(f"f_r = {fr / 1e9:.2f} GHz: dE1 = h f_r near eps = {where} GHz")

# linewidths of the two lowest branches at one detuning
spec = ml.build_spectrum(s.at(-2.5e9), n)
print(f"gamma_01 = {spec.gamma[1, 0] / 1e6:.1f} MHz, gamma_02 = {spec.gamma[2, 0] / 1e6:.1f} MHz")
