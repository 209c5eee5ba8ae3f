"""Vacuum-Rabi splitting of the charge qubit: transmission dips versus hybrid poles.

At resonance the two dips in |S21|^2 sit slightly inside 2 g0.  The 2x2
non-Hermitian pole matrix shows why: damping pulls the normal modes together
by about ((Gamma - kappa/2)/2)^2 / g0, and the dips move further still because
each mode rides on the other's Lorentzian tail.  Shrinking the linewidths
recovers 2 g0.
"""
import numpy as np

from cqedsim import datio
from cqedsim.chargeq import ChargeQubitParams, qubit_frequency, s21_coupled
from cqedsim.resonator import ResonatorParams, TRIVIAL_ENV


def dips(f, z):
    p = np.abs(z) ** 2
    k = np.where((p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:]))[0] + 1
    return np.sort(f[k[np.argsort(p[k])][:2]])


def splitting(p, q, f):
    eps = np.sqrt(max(p.f_r ** 2 - (2 * q.t_c) ** 2, 0.0))
    qr = ChargeQubitParams(eps, q.t_c, q.g0, q.Gamma0, q.Gamma_eps)
    fd = dips(f, s21_coupled(p, TRIVIAL_ENV, qr, f))
    H = np.array([[p.f_r - 0.5j * p.kappa, q.g0], [q.g0, qubit_frequency(qr) - 1j * q.Gamma0]])
    ev = np.sort(np.linalg.eigvals(H).real)
    return fd[1] - fd[0], ev[1] - ev[0]


p, _, q = datio.charge_qubit_from_preset(datio.load_preset("cq_eps_sweep"))
f = np.linspace(p.f_r - 0.4e9, p.f_r + 0.4e9, 80001)
print(f"2 g0 = {2 * q.g0 / 1e6:.1f} MHz")
print(" kappa   Gamma    dips    poles  (MHz)")
for scale in (1.0, 0.5, 0.2, 0.05):
    ps = ResonatorParams(p.f_r, p.kappa_int * scale, p.kappa_ext_mag * scale)
    qs = ChargeQubitParams(0.0, q.t_c, q.g0, q.Gamma0 * scale)
    d, e = splitting(ps, qs, f)
    print(f"{ps.kappa / 1e6:6.1f} {qs.Gamma0 / 1e6:7.1f} {d / 1e6:7.1f} {e / 1e6:8.1f}")
