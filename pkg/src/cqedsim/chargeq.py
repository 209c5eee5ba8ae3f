"""Two-level double-quantum-dot charge qubit dressed by the resonator.

Energies (detuning, tunnel coupling) are given as frequencies E/h in Hz;
couplings and decoherence rates as /2pi values in Hz.  All functions
broadcast over array-valued fields, so a whole detuning axis can be passed
in one :class:`ChargeQubitParams`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EV_TO_HZ, HBAR, TWO_PI, E_CHARGE
from .resonator import EnvironmentParams, ResonatorParams, hanger_response


@dataclass(frozen=True)
class ChargeQubitParams:
    epsilon: float
    t_c: float
    g0: float
    Gamma0: float = 0.0
    Gamma_eps: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.t_c) <= 0):
            raise ValueError("t_c must be > 0")
        for name in ("g0", "Gamma0", "Gamma_eps"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LeverArms:
    """Differential plunger lever arms (eV/V) and zero-detuning offsets (V)."""

    beta_pL: float
    beta_pR: float
    V_pL0: float = 0.0
    V_pR0: float = 0.0

    def __post_init__(self):
        if not (self.beta_pL > 0 and self.beta_pR > 0):
            raise ValueError("lever arms must be > 0")


def qubit_frequency(q: ChargeQubitParams):
    """``sqrt(eps^2 + 4 t_c^2)`` in Hz."""
    return np.hypot(q.epsilon, 2.0 * q.t_c)


def effective_coupling(q: ChargeQubitParams):
    """Dipole-quenched coupling ``g0 * 2 t_c / f_q``."""
    return q.g0 * 2.0 * q.t_c / qubit_frequency(q)


def decoherence(q: ChargeQubitParams):
    """Detuning-dependent linewidth ``Gamma0 + Gamma_eps |eps| / f_q``.

    The absolute value keeps the rate >= Gamma0 on both detuning branches.
    """
    return q.Gamma0 + q.Gamma_eps * np.abs(q.epsilon) / qubit_frequency(q)


def susceptibility(q: ChargeQubitParams, f_d):
    """Charge susceptibility ``g_eff / (-Delta_q + i Gamma)`` in angular units.

    The qubit is taken to sit in its ground state (negligible thermal
    population above ~3 GHz at 10 mK).
    """
    f_d = np.asarray(f_d, dtype=float)
    delta_q = TWO_PI * (qubit_frequency(q) - f_d)
    with np.errstate(divide="ignore", invalid="ignore"):
        return TWO_PI * effective_coupling(q) / (-delta_q + 1j * TWO_PI * decoherence(q))


def s21_coupled(p: ResonatorParams, env: EnvironmentParams, q: ChargeQubitParams, f_d):
    """Feedline transmission of the resonator hybridised with the charge qubit."""
    with np.errstate(invalid="ignore"):
        load = TWO_PI * effective_coupling(q) * susceptibility(q, f_d)
    return hanger_response(p, env, f_d, load=load)


def s21_map(p, env, q: ChargeQubitParams, eps_axis, f_axis):
    """Complex transmission on an (epsilon x f_d) grid, shape ``(n_eps, n_f)``."""
    eps = np.asarray(eps_axis, dtype=float)[:, None]
    f = np.asarray(f_axis, dtype=float)[None, :]
    qq = ChargeQubitParams(eps, q.t_c, q.g0, q.Gamma0, q.Gamma_eps)
    return s21_coupled(p, env, qq, f)


def cooperativity(g0, kappa, Gamma):
    """``C = 4 g0^2 / (kappa Gamma)``; all arguments /2pi in the same unit."""
    if not (kappa > 0 and Gamma > 0):
        raise ValueError("kappa and Gamma must be positive")
    return 4.0 * g0 ** 2 / (kappa * Gamma)


def detuning_from_voltages(lev: LeverArms, V_pL, V_pR):
    """DQD detuning ``beta_pL dV_pL - beta_pR dV_pR`` as a frequency (Hz)."""
    e_ev = (lev.beta_pL * (np.asarray(V_pL, float) - lev.V_pL0)
            - lev.beta_pR * (np.asarray(V_pR, float) - lev.V_pR0))
    return e_ev * EV_TO_HZ


def voltage_from_detuning(lev: LeverArms, epsilon, V_pR=None):
    """Left-plunger voltage giving ``epsilon`` (Hz) with the right plunger at ``V_pR``."""
    V_pR = lev.V_pR0 if V_pR is None else V_pR
    e_ev = np.asarray(epsilon, float) / EV_TO_HZ + lev.beta_pR * (np.asarray(V_pR, float) - lev.V_pR0)
    return lev.V_pL0 + e_ev / lev.beta_pL


def g0_frequency_law(f_r, scale_a):
    """``g0 = a sqrt(f_r)``, the expected coupling scaling at fixed ``C_r``."""
    f_r = np.asarray(f_r, dtype=float)
    if np.any(f_r <= 0):
        raise ValueError("f_r must be > 0")
    return scale_a * np.sqrt(f_r)


def resonator_lever_arm(g0, V0_rms):
    """Resonator differential lever arm (eV/V) from ``g0 = beta_r e V0 / (2 hbar)``.

    ``g0`` is the /2pi coupling in Hz, ``V0_rms`` the vacuum voltage in V.
    """
    return 2.0 * HBAR * TWO_PI * g0 / (E_CHARGE * V0_rms)


def coupling_from_lever_arm(beta_r, V0_rms):
    """Inverse of :func:`resonator_lever_arm`: ``g0 / 2pi`` in Hz."""
    return beta_r * E_CHARGE * V0_rms / (2.0 * HBAR * TWO_PI)
