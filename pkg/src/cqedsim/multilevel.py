"""Four-level strongly-correlated-state (SCS) double-dot model.

Position basis ``[L_g, L_e, R_g, R_e]``: the excess charge sits in the left or
right dot, each dot with a ground and an exchange-split excited orbital.
Energies are frequencies (E/h, Hz); rates are /2pi values in Hz.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, least_squares

from .constants import H, KB, TWO_PI
from .errors import NoFeatureError
from .records import ComplexTrace
from .resonator import EnvironmentParams, ResonatorParams, hanger_response

ODD_LABELS = ("(2,1)g", "(2,1)e", "(1,2)g", "(1,2)e")
EVEN_LABELS = ("(2,0)g", "(2,0)e", "(1,1)g", "(1,1)e")

#: bare relaxation channels, 1-based position-basis pairs
CHANNELS = ("12", "34", "13", "14", "24", "23")

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class ScsParams:
    epsilon: float
    Delta_L: float
    Delta_R: float
    t11: float
    t12: float
    t21: float
    t22: float
    eta_L: float = 1.0
    eta_R: float = 1.0
    g0: float = 0.0
    T: float = 0.01
    parity: str = "odd"

    def __post_init__(self):
        problems = []
        if self.Delta_L < 0 or self.Delta_R < 0:
            problems.append("Delta_L, Delta_R must be >= 0")
        if min(self.t11, self.t12, self.t21, self.t22) < 0:
            problems.append("tunnel couplings must be >= 0")
        if not (0 < self.eta_L <= 1 and 0 < self.eta_R <= 1):
            problems.append("eta_L, eta_R must lie in (0, 1]")
        if not self.T > 0:
            problems.append("T must be > 0")
        if self.g0 < 0:
            problems.append("g0 must be >= 0")
        if self.parity not in ("odd", "even"):
            problems.append("parity must be 'odd' or 'even'")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def labels(self):
        return ODD_LABELS if self.parity == "odd" else EVEN_LABELS

    def at(self, epsilon) -> "ScsParams":
        """Copy at another detuning."""
        d = dict(self.__dict__)
        d["epsilon"] = float(epsilon)
        return ScsParams(**d)

    @classmethod
    def odd(cls, epsilon, Delta_L, Delta_R, t11, t12, t21, t22, **kw):
        return cls(epsilon, Delta_L, Delta_R, t11, t12, t21, t22, parity="odd", **kw)

    @classmethod
    def even(cls, epsilon, Delta_L, t11, t22, **kw):
        """Even configuration: no exchange in the (1,1) pair and no cross tunnelling.

        ``Delta_R = 0`` and ``t12 = t21 = 0`` are imposed, not fitted.
        """
        for k in ("Delta_R", "t12", "t21"):
            if kw.pop(k, 0.0) != 0.0:
                raise ValueError(f"even configuration requires {k} = 0")
        return cls(epsilon, Delta_L, 0.0, t11, 0.0, 0.0, t22, parity="even", **kw)


@dataclass(frozen=True)
class NoiseRates:
    """Detuning-noise rate and bare position-basis relaxation rates (/2pi, Hz)."""

    Gamma_eps: float = 0.0
    Gamma_br: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.Gamma_br) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown relaxation channels {sorted(unknown)}")
        if self.Gamma_eps < 0 or any(v < 0 for v in self.Gamma_br.values()):
            raise ValueError("noise rates must be >= 0")

    def rate(self, ch):
        return float(self.Gamma_br.get(ch, 0.0))


@dataclass(frozen=True)
class ScsSpectrum:
    energies: np.ndarray
    U0: np.ndarray
    d: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    epsilon: float = 0.0


def build_hamiltonian(s: ScsParams):
    """Real symmetric 4x4 Hamiltonian (Hz) in the position basis ``s.labels``."""
    e = s.epsilon
    return np.array([
        [e / 2, 0.0, s.t11, s.t12],
        [0.0, s.eta_L * e / 2 + s.Delta_L, s.t21, s.t22],
        [s.t11, s.t21, -e / 2, 0.0],
        [s.t12, s.t22, 0.0, -s.eta_R * e / 2 + s.Delta_R],
    ])


def _fix_signs(V):
    # largest-magnitude component of every eigenvector made positive
    idx = np.argmax(np.abs(V), axis=0)
    sgn = np.sign(V[idx, np.arange(V.shape[1])])
    sgn[sgn == 0] = 1.0
    return V * sgn


def diagonalize(s: ScsParams):
    """Ascending energies and ``U0`` with ``U0 H U0^dagger`` diagonal."""
    w, V = np.linalg.eigh(build_hamiltonian(s))
    return w, _fix_signs(V).T.conj()


def excitation_spectra(s: ScsParams, eps_grid):
    """``(dE1, dE2, dE3)`` arrays over ``eps_grid``, each ``E_k - E_0``."""
    eps = np.asarray(eps_grid, dtype=float)
    if not np.all(np.isfinite(eps)):
        raise ValueError("eps_grid must be finite")
    Hs = np.array([build_hamiltonian(s.at(e)) for e in eps.ravel()])
    w = np.linalg.eigvalsh(Hs)
    dE = (w[:, 1:] - w[:, :1]).T.reshape((3,) + eps.shape)
    return dE[0], dE[1], dE[2]


def dipole_matrix(U0, eta_L, eta_R):
    """``U0 diag(1, eta_L, -1, -eta_R) U0^dagger``."""
    U0 = np.asarray(U0)
    if U0.shape != (4, 4) or np.max(np.abs(U0 @ U0.conj().T - np.eye(4))) > UNITARY_TOL:
        raise ValueError("U0 must be a 4x4 unitary")
    tau_z = np.diag([1.0, eta_L, -1.0, -eta_R])
    return U0 @ tau_z @ U0.conj().T


def populations(E, T):
    """Boltzmann occupations for energies ``E`` (Hz) at temperature ``T`` (K)."""
    if not T > 0:
        raise ValueError("T must be > 0")
    x = -H * np.asarray(E, dtype=float) / (KB * T)
    x -= x.max()
    w = np.exp(x)
    return w / w.sum()


def _channel_op(ch):
    i, j = int(ch[0]) - 1, int(ch[1]) - 1
    A = np.zeros((4, 4))
    A[i, j] = A[j, i] = 1.0
    return A


def decoherence_matrix(s: ScsParams, n: NoiseRates, U0, d, dephasing="linear"):
    """Symmetric pure-dephasing plus half-relaxation matrix ``gamma`` (Hz).

    Each bare channel contributes ``sqrt(rate) (|i><j| + |j><i|)``; its
    qudit-basis matrix elements squared give ``Gamma^r``.  Dephasing scales
    with the dipole-diagonal difference, linearly by default
    (``Gamma_eps |d_nn - d_mm| / 2``) or quadratically
    (``Gamma_eps (d_nn - d_mm)^2 / 4``).
    """
    U0 = np.asarray(U0)
    Gr = np.zeros((4, 4))
    for ch in CHANNELS:
        r = n.rate(ch)
        if r == 0.0:
            continue
        A = np.sqrt(r) * _channel_op(ch)
        Gr += np.abs(U0 @ A @ U0.conj().T) ** 2
    dd = np.real(np.diag(d))
    diff = np.abs(dd[:, None] - dd[None, :]) / 2.0
    if dephasing == "linear":
        Gphi = n.Gamma_eps * diff
    elif dephasing == "quadratic":
        Gphi = n.Gamma_eps * diff ** 2
    else:
        raise ValueError("dephasing must be 'linear' or 'quadratic'")
    gamma = Gphi + Gr / 2.0
    np.fill_diagonal(gamma, 0.0)
    return gamma


def build_spectrum(s: ScsParams, n: NoiseRates, U0=None, dephasing="linear") -> ScsSpectrum:
    """Full spectrum at ``s.epsilon``.

    ``U0`` may be supplied to pick a particular eigenbasis inside degenerate
    subspaces; it must diagonalise the Hamiltonian.
    """
    if U0 is None:
        E, U0 = diagonalize(s)
    else:
        U0 = np.asarray(U0)
        Hd = U0 @ build_hamiltonian(s) @ U0.conj().T
        E = np.real(np.diag(Hd))
        off = Hd - np.diag(np.diag(Hd))
        if np.max(np.abs(off)) > 1e-10 * max(1.0, np.max(np.abs(Hd))):
            raise ValueError("U0 does not diagonalise the Hamiltonian")
        order = np.argsort(E, kind="stable")
        E, U0 = E[order], U0[order]
    d = dipole_matrix(U0, s.eta_L, s.eta_R)
    rho = populations(E, s.T)
    gamma = decoherence_matrix(s, n, U0, d, dephasing)
    return ScsSpectrum(E, U0, d, rho, gamma, float(s.epsilon))


def multilevel_load(spec: ScsSpectrum, g0, f_d, rwa=True):
    """Angular self-energy ``g0 sum d_nm chi_nm`` on the resonator pole.

    ``chi_nm = g0 d_nm (rho_m - rho_n) / (-(w_n - w_m - w_d) + i gamma_nm)``.
    With ``rwa=True`` only absorptive pairs (n above m) are kept; the
    counter-rotating half sits ~2 f_d away and is dropped as in the two-level
    model.  ``|d_nm|^2`` is used so the result does not depend on eigenvector
    phases.
    """
    f_d = np.asarray(f_d, dtype=float)
    g = TWO_PI * g0
    E = spec.energies
    total = np.zeros(np.broadcast(f_d).shape, dtype=complex)
    for n in range(4):
        for m in range(4):
            if n == m or (rwa and n <= m):
                continue
            w2 = np.abs(spec.d[n, m]) ** 2
            dr = spec.rho[m] - spec.rho[n]
            if w2 == 0.0 or dr == 0.0:
                continue
            den = -TWO_PI * (E[n] - E[m] - f_d) + 1j * TWO_PI * spec.gamma[n, m]
            with np.errstate(divide="ignore", invalid="ignore"):
                total = total + g * g * w2 * dr / den
    return total


def s21_multilevel(p: ResonatorParams, env: EnvironmentParams, spec: ScsSpectrum, g0, f_d, rwa=True):
    """Feedline transmission of the resonator dressed by the four-level system.

    Uses the environment-corrected hanger numerator ``kappa - |kappa_ext| e^{i phi}``
    so the ``g0 -> 0`` limit equals :func:`~cqedsim.resonator.s21_bare`.
    """
    return hanger_response(p, env, f_d, load=multilevel_load(spec, g0, f_d, rwa))


def s21_multilevel_map(p, env, s: ScsParams, n: NoiseRates, eps_axis, f_axis,
                       dephasing="linear", rwa=True):
    """Complex map of shape ``(n_eps, n_f)``."""
    f_axis = np.asarray(f_axis, dtype=float)
    rows = [s21_multilevel(p, env, build_spectrum(s.at(e), n, dephasing=dephasing), s.g0, f_axis, rwa)
            for e in np.asarray(eps_axis, dtype=float)]
    return np.array(rows)


def _lorentz(f, c, w, A, b0, b1):
    return b0 + b1 * (f - c) + A / (1.0 + ((f - c) / (w / 2.0)) ** 2)


def _pole_design(x, c, w):
    # columns: cubic background, single complex pole of half-width w/2
    return np.column_stack([np.ones_like(x), x, x * x, x ** 3, 1.0 / (x - c + 0.5j * w)])


def _pole_fit(x, z, c0, w0):
    """Variable-projection fit of ``cubic(x) + A / (x - c + i w/2)``."""

    def resid(u):
        M = _pole_design(x, u[0], u[1])
        coef, *_ = np.linalg.lstsq(M, z, rcond=None)
        r = M @ coef - z
        return np.concatenate([r.real, r.imag])

    sol = least_squares(resid, [c0, w0], bounds=([x.min(), 1e-6 * w0], [x.max(), 50.0 * w0]),
                        x_scale=[w0, w0], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    M = _pole_design(x, *sol.x)
    coef, *_ = np.linalg.lstsq(M, z, rcond=None)
    return sol.x[0], sol.x[1], coef[-1]


def _feature(f, z):
    """Excursion of ``z`` from a parabola through the trace, plus a robust noise level."""
    u = (f - f.mean()) / np.ptp(f)
    M = np.column_stack([np.ones_like(f), u, u * u])
    coef, *_ = np.linalg.lstsq(M, z, rcond=None)
    dev = z - M @ coef
    dz = np.diff(z)
    noise = 1.4826 * np.median(np.abs(dz - np.median(dz.real) - 1j * np.median(dz.imag))) / np.sqrt(2.0)
    return dev, noise


def _half_width(f, mag, k):
    half = mag >= mag[k] / 2.0
    lo = hi = k
    while lo > 0 and half[lo - 1]:
        lo -= 1
    while hi < len(f) - 1 and half[hi + 1]:
        hi += 1
    return max(f[hi] - f[lo], 2.0 * (f[1] - f[0]))


def linewidth_extract(trace: ComplexTrace, mode="complex", window=2.5, min_snr=6.0):
    """Lorentzian linewidth of the dominant resonance in a trace.

    ``mode="complex"`` fits a single complex pole on a cubic complex
    background, ``cubic(f) + A / (f - c + i fwhm/2)``; its ``|.|^2`` is a
    Lorentzian of the same width, and the fit is insensitive to the Fano-like
    asymmetry a feature acquires on a sloping resonator tail.
    ``mode="power"`` fits ``|S21|^2`` with a real Lorentzian and a linear
    baseline.

    The fit runs over ``window`` crude half-level widths either side of the
    largest excursion.  Returns ``{"center", "fwhm", "amplitude"}``; raises
    :class:`NoFeatureError` when that excursion is below ``min_snr`` robust
    noise units.
    """
    f = trace.freqs
    if mode == "complex":
        z = np.asarray(trace.values, dtype=complex)
        dev, noise = _feature(f, z)
        mag = np.abs(dev)
    elif mode == "power":
        z = np.abs(trace.values) ** 2
        dev, noise = _feature(f, z.astype(complex))
        mag = np.abs(dev)
    else:
        raise ValueError("mode must be 'complex' or 'power'")
    k = int(np.argmax(mag))
    scale = max(np.max(np.abs(z)), 1e-300)
    if mag[k] <= max(min_snr * noise, 1e-9 * scale):
        raise NoFeatureError("no dip or peak found above the noise floor")

    w0 = _half_width(f, mag, k)
    sel = np.abs(f - f[k]) <= window * w0
    if sel.sum() < 8:
        raise NoFeatureError("feature too narrow for the frequency grid")
    # work in units of the crude width about the extremum for conditioning
    x = (f[sel] - f[k]) / w0
    if mode == "complex":
        c, w, A = _pole_fit(x, z[sel], 0.0, 1.0)
        # refit on a window centred on the fitted pole
        for _ in range(3):
            sel2 = np.abs(f - (f[k] + c * w0)) <= window * w * w0
            if sel2.sum() < 8 or np.array_equal(sel2, sel):
                break
            sel = sel2
            c, w, A = _pole_fit((f[sel] - f[k]) / w0, z[sel], c, w)
        amp = complex(A) * 2.0 / (w * w0) * w0  # peak excursion |A|/(w/2) in trace units
        return {"center": float(f[k] + c * w0), "fwhm": float(w * w0), "amplitude": abs(amp)}
    amp0 = float(dev[k].real)
    try:
        with warnings.catch_warnings():
            # exact synthetic data leave the covariance undefined; only popt is used
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(_lorentz, x, z[sel], p0=[0.0, 1.0, amp0, float(np.median(z)), 0.0],
                                maxfev=20000)
    except RuntimeError as exc:
        raise NoFeatureError(f"Lorentzian fit failed: {exc}") from None
    return {"center": float(f[k] + popt[0] * w0), "fwhm": float(abs(popt[1]) * w0),
            "amplitude": float(popt[2])}
