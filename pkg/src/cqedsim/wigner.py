"""Two charges in an anisotropic harmonic dot: relative-coordinate eigenproblem.

Lengths are in units of the oscillator length ``l_x`` and energies in units of
``hbar*omega_orb``, so the relative Hamiltonian reads

    H = -lap/2 + (x^2 + y^2/alpha^2)/2 + lambda_W / sqrt(x^2 + y^2 + s^2)

Spatially even relative states pair with the spin singlet, odd ones with the
triplet, so the singlet-triplet gap is the first-odd minus first-even level.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.ndimage import gaussian_filter

from .constants import E_CHARGE, EPS0, H, HBAR
from .errors import EigensolverError, GridConvergenceError

#: levels closer than this (in hbar*omega) are treated as one degenerate cluster
DEGENERACY_TOL = 1e-6
CONVERGENCE_TOL = 1e-3


@dataclass(frozen=True)
class ConfinementModel:
    hbar_omega_orb: float
    lambda_W: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.hbar_omega_orb > 0:
            raise ValueError("hbar_omega_orb must be > 0")
        if self.lambda_W < 0:
            raise ValueError("lambda_W must be >= 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class GridSpec:
    half_extent: float = 6.0
    points_per_axis: int = 320
    softcore: float | None = None  # None -> half the grid spacing

    def __post_init__(self):
        if self.points_per_axis < 32:
            raise ValueError("points_per_axis must be >= 32")
        if not self.half_extent > 3:
            raise ValueError("half_extent must be > 3")
        if self.softcore is not None and self.softcore < 0:
            raise ValueError("softcore must be >= 0")
        if self.points_per_axis / (2 * self.half_extent) < 8:
            raise ValueError("grid must resolve the oscillator length (>= 8 points per unit)")

    @property
    def spacing(self):
        return 2.0 * self.half_extent / self.points_per_axis

    @property
    def s(self):
        return self.spacing / 2.0 if self.softcore is None else self.softcore

    def axis(self):
        # node-staggered: no point sits on the origin
        return -self.half_extent + (np.arange(self.points_per_axis) + 0.5) * self.spacing

    def refined(self):
        """Same extent and softcore with twice the points."""
        return GridSpec(self.half_extent, 2 * self.points_per_axis, self.s)


@dataclass
class WignerSpectrum:
    levels: np.ndarray
    parities: np.ndarray
    delta_ST: float
    delta_ST_hz: float
    model: ConfinementModel
    grid: GridSpec
    overlaps: np.ndarray = field(repr=False, default=None)  # <psi|P psi>
    residuals: np.ndarray = field(repr=False, default=None)
    vectors: np.ndarray | None = field(repr=False, default=None)

    def parity_labels(self):
        return ["even" if p > 0 else "odd" for p in self.parities]


def orbital_energy(m_eff, l_QD):
    """``hbar^2 / (m* l^2)`` expressed as a frequency (Hz)."""
    if not (m_eff > 0 and l_QD > 0):
        raise ValueError("mass and length must be positive")
    return HBAR ** 2 / (m_eff * l_QD ** 2) / H


def wigner_ratio(m_eff, l_x, eps_rel, hbar_omega=None):
    """Coulomb energy at separation ``l_x`` over the orbital energy.

    ``hbar_omega`` (Hz) overrides the orbital energy computed from
    ``m_eff`` and ``l_x``, e.g. to use a rounded published value.
    """
    if not (m_eff > 0 and l_x > 0 and eps_rel > 0):
        raise ValueError("inputs must be positive")
    e_ee = E_CHARGE ** 2 / (4.0 * np.pi * EPS0 * eps_rel * l_x)
    hw = orbital_energy(m_eff, l_x) if hbar_omega is None else hbar_omega
    return e_ee / (H * hw)


def relative_hamiltonian(model: ConfinementModel, grid: GridSpec):
    """Sparse CSR Hamiltonian and the potential on the grid."""
    x = grid.axis()
    h = grid.spacing
    n = grid.points_per_axis
    X, Y = np.meshgrid(x, x, indexing="ij")
    V = 0.5 * (X ** 2 + Y ** 2 / model.alpha ** 2)
    if model.lambda_W:
        V = V + model.lambda_W / np.sqrt(X ** 2 + Y ** 2 + grid.s ** 2)
    e = np.ones(n)
    D2 = sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1]) / h ** 2
    I = sp.identity(n)
    T = -0.5 * (sp.kron(D2, I) + sp.kron(I, D2))
    return (T + sp.diags(V.ravel())).tocsr(), V


def _parity_resolve(w, v, n):
    """Parity of each eigenvector; degenerate clusters are rotated to parity eigenstates."""
    k = len(w)
    P = lambda vec: vec.reshape(n, n)[::-1, ::-1].ravel()
    par = np.empty(k)
    i = 0
    while i < k:
        j = i + 1
        while j < k and w[j] - w[j - 1] < DEGENERACY_TOL:
            j += 1
        block = v[:, i:j]
        Pm = block.T @ np.column_stack([P(block[:, c]) for c in range(j - i)])
        pw, pv = np.linalg.eigh(0.5 * (Pm + Pm.T))
        order = np.argsort(-pw, kind="stable")  # even first inside a cluster
        v[:, i:j] = block @ pv[:, order]
        for c in range(i, j):
            par[c] = v[:, c] @ P(v[:, c])
        i = j
    return par


def _solve_grid(model, grid, n_levels):
    Hm, V = relative_hamiltonian(model, grid)
    k = n_levels
    try:
        # fixed start vector: ARPACK's internal one depends on earlier calls in the process
        v0 = np.random.default_rng(0).standard_normal(Hm.shape[0])
        w, v = sla.eigsh(Hm.tocsc(), k=k, sigma=float(V.min()) - 1.0, which="LM", v0=v0)
    except sla.ArpackNoConvergence as exc:
        res = [np.linalg.norm(Hm @ exc.eigenvectors[:, i] - exc.eigenvalues[i] * exc.eigenvectors[:, i])
               for i in range(len(exc.eigenvalues))]
        raise EigensolverError("sparse eigensolver did not converge", res) from None
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    v /= np.linalg.norm(v, axis=0)
    hnorm = sla.norm(Hm, np.inf)
    res = np.linalg.norm(Hm @ v - v * w, axis=0)
    if np.any(res > 1e-8 * hnorm):
        raise EigensolverError("eigenvector residual above 1e-8 |H|", res)
    return w, v, res


def solve_relative(model: ConfinementModel, grid: GridSpec = GridSpec(), n_levels=8,
                   check_convergence=False, keep_vectors=False) -> WignerSpectrum:
    """Lowest ``n_levels`` relative-coordinate levels with parity labels.

    With ``check_convergence`` the solve is repeated on a grid with twice the
    points; a shift above 1e-3 in any level raises
    :class:`GridConvergenceError`.
    """
    if n_levels < 2:
        raise ValueError("need at least two levels to form a singlet-triplet gap")
    w, v, res = _solve_grid(model, grid, n_levels)
    par = _parity_resolve(w, v, grid.points_per_axis)
    if check_convergence:
        w2, _, _ = _solve_grid(model, grid.refined(), n_levels)
        shifts = np.abs(w2 - w)
        if np.any(shifts > CONVERGENCE_TOL):
            raise GridConvergenceError("grid not converged: doubling points shifts levels by > 1e-3",
                                       shifts)
    even = w[par > 0]
    odd = w[par < 0]
    if len(even) == 0 or len(odd) == 0:
        raise EigensolverError("no level of one parity among the requested levels; raise n_levels", res)
    dst = float(odd[0] - even[0])
    return WignerSpectrum(levels=w, parities=np.sign(par), delta_ST=dst,
                          delta_ST_hz=dst * model.hbar_omega_orb, model=model, grid=grid,
                          overlaps=par, residuals=res, vectors=v if keep_vectors else None)


def separable_levels(alpha, n_levels):
    """Analytic non-interacting relative levels ``(n_x+1/2) + (n_y+1/2)/alpha``.

    Returns ``(energies, parities)`` sorted ascending.
    """
    m = n_levels + 2
    nx, ny = np.meshgrid(np.arange(2 * m), np.arange(2 * m), indexing="ij")
    E = (nx + 0.5) + (ny + 0.5) / alpha
    P = (-1.0) ** (nx + ny)
    o = np.lexsort((-P.ravel(), E.ravel()))
    return E.ravel()[o][:n_levels], P.ravel()[o][:n_levels]


def total_levels(spectrum: WignerSpectrum, n_levels=None):
    """Two-particle energies ``E_rel + E_R`` with the analytic centre-of-mass ladder.

    In the rescaled units the centre-of-mass oscillator has the same
    frequencies as the relative one, ``(N_X + 1/2) + (N_Y + 1/2)/alpha``.
    """
    n = len(spectrum.levels) if n_levels is None else n_levels
    com, _ = separable_levels(spectrum.model.alpha, n)
    return np.sort(np.add.outer(spectrum.levels, com).ravel())[:n]


@dataclass
class SweepResult:
    alphas: np.ndarray
    spectra: list  # WignerSpectrum or None for failed points
    errors: dict
    band: tuple | None = None
    first_in_band: float | None = None

    def delta_ST_hz(self):
        return np.array([np.nan if s is None else s.delta_ST_hz for s in self.spectra])

    def crossing(self, level_hz):
        """Alpha where the gap first falls to ``level_hz`` walking down from isotropy.

        Linear interpolation between the bracketing sweep points; None if the
        sweep never reaches the level.
        """
        order = np.argsort(-self.alphas, kind="stable")
        a, g = self.alphas[order], self.delta_ST_hz()[order]
        ok = np.isfinite(g)
        a, g = a[ok], g[ok]
        for i in range(1, a.size):
            if (g[i - 1] - level_hz) * (g[i] - level_hz) <= 0 and g[i] != g[i - 1]:
                return float(a[i - 1] + (level_hz - g[i - 1]) * (a[i] - a[i - 1]) / (g[i] - g[i - 1]))
        return None


def _sweep_point(args):
    lam, a, hw, grid, n_levels = args
    try:
        return solve_relative(ConfinementModel(hw, lam, a), grid, n_levels), None
    except (EigensolverError, GridConvergenceError) as exc:
        return None, str(exc)


def anisotropy_sweep(lambda_W, alpha_grid, grid: GridSpec = GridSpec(), n_levels=8,
                     hbar_omega_orb=70e9, band=None, workers=1) -> SweepResult:
    """Spectra over ``alpha_grid``.

    ``band = (lo, hi)`` in Hz: ``first_in_band`` is the largest alpha (walking
    down from isotropy) whose gap lies inside the band.  Failed points are
    kept as ``None`` with their message in ``errors``.
    """
    alphas = np.round(np.asarray(alpha_grid, dtype=float), 12)
    if np.any(alphas <= 0) or np.any(alphas > 1):
        raise ValueError("alpha values must lie in (0, 1]")
    jobs = [(lambda_W, float(a), hbar_omega_orb, grid, n_levels) for a in alphas]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_sweep_point, jobs))
    else:
        out = [_sweep_point(j) for j in jobs]
    spectra = [o[0] for o in out]
    errors = {float(a): o[1] for a, o in zip(alphas, out) if o[1] is not None}
    res = SweepResult(alphas, spectra, errors, band)
    if band is not None:
        lo, hi = band
        for i in np.argsort(-alphas, kind="stable"):
            s = spectra[i]
            if s is not None and lo <= s.delta_ST_hz <= hi:
                res.first_in_band = float(alphas[i])
                break
    return res


def charge_density(model: ConfinementModel, grid: GridSpec = GridSpec(), level_index=0,
                   spectrum: WignerSpectrum | None = None):
    """Single-particle density for the two-particle state ``level_index``.

    The relative density is convolved with the centre-of-mass oscillator
    ground state and mapped back with ``r1 = (R + r)/sqrt(2)``.  Returns
    ``(x, y, n)`` on the single-particle grid (units of ``l_x``) with
    ``sum(n) dx dy = 2``.
    """
    if spectrum is None or spectrum.vectors is None:
        spectrum = solve_relative(model, grid, max(level_index + 1, 2), keep_vectors=True)
    npts = grid.points_per_axis
    h = grid.spacing
    psi = spectrum.vectors[:, level_index].reshape(npts, npts)
    rel = psi ** 2 / (np.sum(psi ** 2) * h * h)
    # COM ground density exp(-X^2 - Y^2/alpha) has sigma 1/sqrt2 and sqrt(alpha/2)
    conv = gaussian_filter(rel, sigma=(np.sqrt(0.5) / h, np.sqrt(model.alpha / 2.0) / h),
                           mode="constant", truncate=8.0)
    x1 = grid.axis() / np.sqrt(2.0)
    h1 = h / np.sqrt(2.0)
    n = conv * 2.0 / (np.sum(conv) * h1 * h1)
    return x1, x1.copy(), n
