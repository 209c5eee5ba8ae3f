"""Bare flux-tunable SQUID-array hanger resonator.

Rates are stored as /2pi values in Hz and promoted to angular frequencies
inside :func:`s21_bare`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR, TWO_PI
from .errors import ConfigError, OutOfRangeError

#: Half-flux guard: below this |cos(pi Phi/Phi0)| the symmetric-SQUID model is
#: not trusted.
HALF_FLUX_TOL = 1e-3


@dataclass(frozen=True)
class ResonatorParams:
    f_r: float
    kappa_int: float
    kappa_ext_mag: float
    phi: float = 0.0
    C_r: float = 24e-15
    N_squid: int = 25

    def __post_init__(self):
        problems = []
        if not self.f_r > 0:
            problems.append("f_r must be > 0")
        if self.kappa_int < 0 or self.kappa_ext_mag < 0:
            problems.append("linewidths must be >= 0")
        if not (-np.pi < self.phi <= np.pi):
            problems.append("phi must lie in (-pi, pi]")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def kappa(self):
        """Total linewidth /2pi (Hz)."""
        return self.kappa_int + self.kappa_ext_mag


@dataclass(frozen=True)
class EnvironmentParams:
    """Feedline correction ``a * exp(i alpha) * exp(-2 pi i f tau)``."""

    a: float = 1.0
    alpha: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("amplitude scale a must be > 0")
        if self.tau < 0:
            raise ValueError("electrical delay tau must be >= 0")

    def factor(self, f_d):
        f_d = np.asarray(f_d, dtype=float)
        return self.a * np.exp(1j * self.alpha) * np.exp(-1j * TWO_PI * f_d * self.tau)


TRIVIAL_ENV = EnvironmentParams()


def _check_drive(f_d):
    f_d = np.asarray(f_d, dtype=float)
    if np.any(f_d <= 0):
        raise ValueError("drive frequency must be > 0")
    return f_d


def hanger_response(p: ResonatorParams, env: EnvironmentParams, f_d, load=0.0):
    """Hanger transmission with an extra complex load term in the resonator pole.

    ``load`` is the angular-frequency self-energy added to both numerator and
    denominator (``g*chi`` for a coupled emitter).  With ``load=0`` this is the
    bare resonator.  A load that diverges (an undamped emitter driven exactly
    on its transition) detunes the resonator away entirely, so the response
    there is the environment factor alone.
    """
    f_d = _check_drive(f_d)
    delta_r = TWO_PI * (p.f_r - f_d)
    kappa = TWO_PI * p.kappa
    k_ext = TWO_PI * p.kappa_ext_mag * np.exp(1j * p.phi)
    num = delta_r - 0.5j * (kappa - k_ext) + load
    den = delta_r - 0.5j * kappa + load
    with np.errstate(invalid="ignore"):
        out = env.factor(f_d) * num / den
    if np.ndim(load) and not np.all(np.isfinite(load)):
        out = np.where(np.isfinite(load), out, env.factor(f_d) * np.ones_like(out))
    elif not np.ndim(load) and not np.isfinite(load):
        out = env.factor(f_d) * np.ones_like(out)
    return out


def s21_bare(p: ResonatorParams, env: EnvironmentParams, f_d):
    """Complex feedline transmission of the uncoupled resonator.

    Vectorised over ``f_d`` (Hz).  On resonance with a trivial environment and
    ``phi = 0`` this equals ``kappa_int / kappa``.
    """
    return hanger_response(p, env, f_d)


def impedance(L_total, C_r):
    """Lumped impedance and resonance frequency of an LC resonator.

    Returns ``(Z_r, f_r)`` with ``Z_r = sqrt(L/C)`` in ohm and
    ``f_r = 1 / (2 pi sqrt(L C))`` in Hz.
    """
    if not (L_total > 0 and C_r > 0):
        raise ValueError("inductance and capacitance must be positive")
    return float(np.sqrt(L_total / C_r)), float(1.0 / (TWO_PI * np.sqrt(L_total * C_r)))


def impedance_at_frequency(f_r, C_r):
    """Impedance of the lumped resonator tuned to ``f_r`` at fixed ``C_r``."""
    if not (f_r > 0 and C_r > 0):
        raise ValueError("frequency and capacitance must be positive")
    return 1.0 / (TWO_PI * f_r * C_r)


def vacuum_voltage(f_r, Z_r):
    """Zero-point rms voltage ``2 pi f_r sqrt(hbar Z_r / 2)`` in volts."""
    if not (f_r > 0 and Z_r > 0):
        raise ValueError("f_r and Z_r must be positive")
    return TWO_PI * f_r * np.sqrt(HBAR * Z_r / 2.0)


@dataclass(frozen=True)
class CoilCalibration:
    """Linear map from coil voltage to applied flux, in flux quanta."""

    V_per_Phi0: float
    V_offset: float = 0.0

    def flux_quanta(self, V_flux):
        return (np.asarray(V_flux, dtype=float) - self.V_offset) / self.V_per_Phi0


def squid_array_inductance(V_flux, coil: CoilCalibration, L0_per_squid, N):
    """Total array inductance ``N L0 / |cos(pi Phi / Phi0)|``.

    Raises :class:`OutOfRangeError` within the half-flux guard band.
    """
    c = np.abs(np.cos(np.pi * coil.flux_quanta(V_flux)))
    if np.any(c <= HALF_FLUX_TOL):
        raise OutOfRangeError("flux too close to half a flux quantum "
                              f"(|cos| <= {HALF_FLUX_TOL}); SQUID model not valid")
    return N * L0_per_squid / c


def flux_to_frequency(V_flux, coil: CoilCalibration, L0_per_squid, N, C_r):
    """Resonance frequency (Hz) for a coil voltage, vectorised over ``V_flux``."""
    L = squid_array_inductance(V_flux, coil, L0_per_squid, N)
    return 1.0 / (TWO_PI * np.sqrt(L * C_r))


def coil_for_crossing(f_target, V_target, L0_per_squid, N, C_r, V_offset=0.0):
    """Calibration that puts ``f_r = f_target`` at ``V_flux = V_target``.

    Convenience for simulations when no measured calibration is at hand; the
    crossing is placed on the first flux lobe.
    """
    _, f0 = impedance(N * L0_per_squid, C_r)
    ratio = (f_target / f0) ** 2
    if not 0 < ratio <= 1:
        raise OutOfRangeError("target frequency above the zero-flux frequency")
    frac = np.arccos(ratio) / np.pi
    return CoilCalibration(V_per_Phi0=(V_target - V_offset) / frac, V_offset=V_offset)


@dataclass
class KappaTable:
    """Tabulated linewidths versus resonator frequency, linearly interpolated."""

    f_r: np.ndarray
    kappa: np.ndarray
    kappa_ext: np.ndarray
    source: str = ""

    def __post_init__(self):
        order = np.argsort(self.f_r)
        self.f_r = np.asarray(self.f_r, float)[order]
        self.kappa = np.asarray(self.kappa, float)[order]
        self.kappa_ext = np.asarray(self.kappa_ext, float)[order]

    def at(self, f_r, phi=0.0) -> ResonatorParams:
        k = float(np.interp(f_r, self.f_r, self.kappa))
        ke = float(np.interp(f_r, self.f_r, self.kappa_ext))
        return ResonatorParams(f_r=f_r, kappa_int=k - ke, kappa_ext_mag=ke, phi=phi)


#: Bare-resonator linewidths reported alongside the charge-qubit fits
#: (kappa, kappa_ext /2pi in Hz).
MEASURED_KAPPAS = KappaTable(
    f_r=np.array([4.052, 4.149, 4.156, 4.389, 4.565, 4.747, 4.983, 5.109, 5.432]) * 1e9,
    kappa=np.array([23, 19, 19, 20, 22, 32, 37, 39, 61]) * 1e6,
    kappa_ext=np.array([9, 8, 8, 11, 13, 21, 22, 29, 42]) * 1e6,
    source="charge-qubit and five-panel spectroscopy tables; bare cavity at 5.109 GHz",
)


_RES_KEYS = {"f_r": float, "kappa_int": float, "kappa_ext_mag": float, "phi": float,
             "C_r": float, "N_squid": int}
_ENV_KEYS = {"a": float, "alpha": float, "tau": float}


def load_resonator_config(path):
    """Read resonator and environment parameters from an INI-style file.

    Schema::

        [resonator]
        f_r = 5.109e9          ; Hz
        kappa_int = 10e6       ; Hz (/2pi)
        kappa_ext_mag = 29e6   ; Hz (/2pi)
        phi = 0.0              ; rad, optional
        C_r = 24e-15           ; F, optional
        N_squid = 25           ; optional

        [environment]          ; optional section
        a = 1.0
        alpha = 0.0            ; rad
        tau = 0.0              ; s

    Every problem found is reported at once via :class:`ConfigError`.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path):
        raise ConfigError([f"cannot read config file {path}"])
    problems = []

    def section(name, keys, required):
        out = {}
        if not cp.has_section(name):
            if required:
                problems.append(f"missing section [{name}]")
            return out
        for k, v in cp.items(name):
            key = next((kk for kk in keys if kk.lower() == k), None)
            if key is None:
                problems.append(f"[{name}] unknown key '{k}'")
                continue
            try:
                out[key] = keys[key](float(v)) if keys[key] is int else keys[key](v)
            except ValueError:
                problems.append(f"[{name}] {k}: cannot parse '{v}'")
        return out

    res = section("resonator", _RES_KEYS, True)
    env = section("environment", _ENV_KEYS, False)
    for k in ("f_r", "kappa_int", "kappa_ext_mag"):
        if cp.has_section("resonator") and k not in res:
            problems.append(f"[resonator] missing key '{k}'")
    if problems:
        raise ConfigError(problems)
    try:
        return ResonatorParams(**res), EnvironmentParams(**env)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
