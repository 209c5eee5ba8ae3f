"""Forward models known to the fit engine.

Each model maps a coordinate dict (flattened arrays) and a parameter dict to
model values, and may provide an analytic Jacobian as a dict of
``d model / d param`` arrays.  Values are complex for transmission models
and real otherwise.
"""
from __future__ import annotations

import numpy as np

from ..constants import EV_TO_HZ, KB, E_CHARGE, TWO_PI

RES_PARAMS = ("f_r", "kappa_int", "kappa_ext", "phi", "a", "alpha", "tau")
QUBIT_PARAMS = ("t_c", "g0", "Gamma0", "Gamma_eps")
SCS_PARAMS = ("Delta_L", "Delta_R", "t11", "t12", "t21", "t22", "eta_L", "eta_R", "g0",
              "Gamma_eps", "G12", "G34", "G13", "G14", "G24", "G23", "T")


class Model:
    id = ""
    complex = True

    def param_names(self, coords):
        raise NotImplementedError

    def evaluate(self, coords, p):
        raise NotImplementedError

    jacobian = None  # optional: (coords, p, names) -> {name: array}


def _hanger_parts(f, p, load=0.0):
    """Pieces shared by the hanger models: prefactor, denominator, K, R."""
    P = p["a"] * np.exp(1j * p["alpha"]) * np.exp(-1j * TWO_PI * f * p["tau"])
    den = TWO_PI * (p["f_r"] - f) - 0.5j * TWO_PI * (p["kappa_int"] + p["kappa_ext"]) + load
    K = TWO_PI * p["kappa_ext"] * np.exp(1j * p["phi"])
    R = 1.0 + 0.5j * K / den
    return P, den, K, R


def _hanger_jac(f, p, P, den, K, R, names):
    dR_dden = -0.5j * K / den ** 2
    S = P * R
    out = {}
    for n in names:
        if n == "f_r":
            out[n] = P * dR_dden * TWO_PI
        elif n == "kappa_int":
            out[n] = P * dR_dden * (-0.5j * TWO_PI)
        elif n == "kappa_ext":
            out[n] = P * (0.5j * TWO_PI * np.exp(1j * p["phi"]) / den + dR_dden * (-0.5j * TWO_PI))
        elif n == "phi":
            out[n] = P * (-0.5 * K / den)
        elif n == "a":
            out[n] = S / p["a"]
        elif n == "alpha":
            out[n] = 1j * S
        elif n == "tau":
            out[n] = -1j * TWO_PI * f * S
    return out, P * dR_dden


class BareModel(Model):
    id = "bare"

    def param_names(self, coords):
        return RES_PARAMS

    def evaluate(self, coords, p):
        P, _, _, R = _hanger_parts(coords["f"], p)
        return P * R

    def jacobian(self, coords, p, names):
        f = coords["f"]
        P, den, K, R = _hanger_parts(f, p)
        return _hanger_jac(f, p, P, den, K, R, names)[0]


class TwoLevelModel(Model):
    """Resonator plus charge qubit.

    The detuning comes from coordinate ``eps`` (Hz), from coordinate ``v``
    (left-plunger volts, with parameters ``beta_pL`` in eV/V and ``V_pL0``),
    or, with neither, from a parameter ``eps`` (single line cut).
    """

    id = "two-level"

    def _mode(self, coords):
        if "eps" in coords:
            return "eps"
        if "v" in coords:
            return "v"
        return "param"

    def param_names(self, coords):
        extra = {"eps": (), "v": ("beta_pL", "V_pL0"), "param": ("eps",)}[self._mode(coords)]
        return RES_PARAMS + QUBIT_PARAMS + extra

    def _eps(self, coords, p):
        mode = self._mode(coords)
        if mode == "eps":
            return coords["eps"]
        if mode == "v":
            return p["beta_pL"] * (coords["v"] - p["V_pL0"]) * EV_TO_HZ
        return np.full_like(coords["f"], p["eps"], dtype=float)

    def _parts(self, coords, p):
        f = coords["f"]
        eps = self._eps(coords, p)
        t = p["t_c"]
        fq = np.hypot(eps, 2.0 * t)
        geff = p["g0"] * 2.0 * t / fq
        gam = p["Gamma0"] + p["Gamma_eps"] * np.abs(eps) / fq
        G = TWO_PI * geff
        Q = -TWO_PI * (fq - f) + 1j * TWO_PI * gam
        X = G * G / Q
        return f, eps, t, fq, geff, gam, G, Q, X

    def evaluate(self, coords, p):
        f, *_, X = self._parts(coords, p)
        P, _, _, R = _hanger_parts(f, p, X)
        return P * R

    def jacobian(self, coords, p, names):
        f, eps, t, fq, geff, gam, G, Q, X = self._parts(coords, p)
        P, den, K, R = _hanger_parts(f, p, X)
        out, dS_dden = _hanger_jac(f, p, P, den, K, R, [n for n in names if n in RES_PARAMS])
        dX_dG = 2.0 * G / Q
        dX_dQ = -G * G / Q ** 2
        fq3 = fq ** 3
        ae = np.abs(eps)
        g0, Ge = p["g0"], p["Gamma_eps"]

        def via(dgeff, dfq, dgam):
            dX = dX_dG * TWO_PI * dgeff + dX_dQ * (-TWO_PI * dfq + 1j * TWO_PI * dgam)
            return dS_dden * dX

        d_eps = None
        mode = self._mode(coords)
        if mode != "eps" and any(n in names for n in ("beta_pL", "V_pL0", "eps")):
            d_eps = via(-2.0 * g0 * t * eps / fq3, eps / fq, Ge * np.sign(eps) * 4.0 * t * t / fq3)
        zero = np.zeros_like(f, dtype=float)
        for n in names:
            if n in out:
                continue
            if n == "g0":
                out[n] = via(2.0 * t / fq, zero, zero)
            elif n == "t_c":
                out[n] = via(2.0 * g0 * eps ** 2 / fq3, 4.0 * t / fq, -Ge * ae * 4.0 * t / fq3)
            elif n == "Gamma0":
                out[n] = via(zero, zero, np.ones_like(zero))
            elif n == "Gamma_eps":
                out[n] = via(zero, zero, ae / fq)
            elif n == "beta_pL":
                out[n] = d_eps * (coords["v"] - p["V_pL0"]) * EV_TO_HZ
            elif n == "V_pL0":
                out[n] = d_eps * (-p["beta_pL"] * EV_TO_HZ)
            elif n == "eps":
                out[n] = d_eps
        return out


class MultilevelModel(Model):
    """Four-level model on ``f`` / ``eps`` coordinates; Jacobian by differences."""

    id = "multilevel"

    def __init__(self, parity="odd", dephasing="linear"):
        self.parity = parity
        self.dephasing = dephasing

    def param_names(self, coords):
        return RES_PARAMS + SCS_PARAMS

    def evaluate(self, coords, p):
        from .. import multilevel as ml

        f, eps = coords["f"], coords["eps"]
        load = np.zeros(f.shape, dtype=complex)
        noise = ml.NoiseRates(p["Gamma_eps"], {c: p["G" + c] for c in ml.CHANNELS})
        for e in np.unique(eps):
            m = eps == e
            s = ml.ScsParams(float(e), p["Delta_L"], p["Delta_R"], p["t11"], p["t12"], p["t21"],
                             p["t22"], p["eta_L"], p["eta_R"], p["g0"], p["T"], self.parity)
            spec = ml.build_spectrum(s, noise, dephasing=self.dephasing)
            load[m] = ml.multilevel_load(spec, p["g0"], f[m])
        P, _, _, R = _hanger_parts(f, p, load)
        return P * R


def _sech2(x):
    # overflow-free 1/cosh^2
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


class CoulombPeakModel(Model):
    """``G = Gmax / cosh^2(lever e (V - V0) / (2 kB T_e)) + c`` with lever in eV/V."""

    id = "coulomb-peak"
    complex = False

    def param_names(self, coords):
        return ("Gmax", "V0", "T_e", "c", "lever")

    def _arg(self, coords, p):
        return p["lever"] * E_CHARGE * (coords["v"] - p["V0"]) / (2.0 * KB * p["T_e"])

    def evaluate(self, coords, p):
        return p["Gmax"] * _sech2(self._arg(coords, p)) + p["c"]

    def jacobian(self, coords, p, names):
        x = self._arg(coords, p)
        sech2 = _sech2(x)
        dG_dx = -2.0 * p["Gmax"] * sech2 * np.tanh(x)
        out = {}
        for n in names:
            if n == "Gmax":
                out[n] = sech2
            elif n == "c":
                out[n] = np.ones_like(x)
            elif n == "V0":
                out[n] = dG_dx * (-p["lever"] * E_CHARGE / (2.0 * KB * p["T_e"]))
            elif n == "T_e":
                out[n] = dG_dx * (-x / p["T_e"])
            elif n == "lever":
                out[n] = dG_dx * x / p["lever"]
        return out


class G0LawModel(Model):
    """``g0 = scale_a * sqrt(f_r)``."""

    id = "g0-law"
    complex = False

    def param_names(self, coords):
        return ("scale_a",)

    def evaluate(self, coords, p):
        return p["scale_a"] * np.sqrt(coords["f_r"])

    def jacobian(self, coords, p, names):
        return {n: np.sqrt(coords["f_r"]) for n in names}


REGISTRY = {
    "bare": BareModel(),
    "two-level": TwoLevelModel(),
    "multilevel": MultilevelModel(),
    "coulomb-peak": CoulombPeakModel(),
    "g0-law": G0LawModel(),
}


def get_model(model):
    if isinstance(model, Model):
        return model
    try:
        return REGISTRY[model]
    except KeyError:
        raise ValueError(f"unknown model id {model!r}; known: {sorted(REGISTRY)}") from None
