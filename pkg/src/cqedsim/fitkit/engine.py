"""Bounded Levenberg-Marquardt least squares over several datasets.

Complex residuals are stacked as (real, imag) pairs.  Parameters are
optimised in scaled coordinates ``u = p / scale`` with Marquardt's diagonal
damping; steps are projected onto the bounds and accepted only if they lower
the cost, so the recorded cost history is non-increasing.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import FitError, SingularJacobianError
from .models import get_model

FTOL = 1e-10
GTOL = 1e-8
MAX_ITER = 500
IDENT_TOL = 1e-12


@dataclass
class Parameter:
    name: str
    value: float
    lo: float = -np.inf
    hi: float = np.inf
    fixed: bool = False
    shared: bool = False
    scale: float | None = None

    def resolved_scale(self):
        if self.scale:
            return abs(self.scale)
        if self.value != 0:
            return abs(self.value)
        if np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo:
            return self.hi - self.lo
        return 1.0


@dataclass
class Dataset:
    """Data plus its forward model.

    ``binding`` maps each model parameter to either the name of a global
    :class:`Parameter` (str) or a constant (number).  Unbound model parameters
    bind to the global parameter of the same name.
    """

    model: object
    coords: dict
    data: np.ndarray
    binding: dict = field(default_factory=dict)
    weights: np.ndarray | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.model = get_model(self.model)
        self.coords = {k: np.asarray(v, dtype=float).ravel() for k, v in self.coords.items()}
        self.data = np.asarray(self.data).ravel()
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if self.weights.shape != self.data.shape or np.any(self.weights < 0):
                raise ValueError(f"dataset {self.name!r}: weights must match data and be >= 0")
        for k, v in self.coords.items():
            if v.shape != self.data.shape:
                raise ValueError(f"dataset {self.name!r}: coordinate {k!r} does not match data")

    def resolve(self):
        """``{model_param: global_name or float}`` for every model parameter."""
        out = {}
        for n in self.model.param_names(self.coords):
            b = self.binding.get(n, n)
            out[n] = b if isinstance(b, str) else float(b)
        return out

    @property
    def n_residuals(self):
        return self.data.size * (2 if self.model.complex else 1)

    def key(self):
        h = hashlib.sha256()
        h.update(self.model.id.encode())
        h.update(repr(sorted((k, str(v)) for k, v in self.binding.items())).encode())
        for k in sorted(self.coords):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.coords[k]).tobytes())
        h.update(np.ascontiguousarray(self.data).tobytes())
        if self.weights is not None:
            h.update(self.weights.tobytes())
        return h.hexdigest()


@dataclass
class FitProblem:
    datasets: list
    params: list
    absolute_sigma: bool | None = None  # default: True when any dataset carries weights

    def __post_init__(self):
        problems = []
        if not self.datasets:
            problems.append("at least one dataset is required")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            problems.append("duplicate parameter names")
        pmap = {p.name: p for p in self.params}
        for p in self.params:
            if not (p.lo <= p.value <= p.hi):
                problems.append(f"parameter {p.name}: init {p.value} outside [{p.lo}, {p.hi}]")
        refs = {}
        for i, d in enumerate(self.datasets):
            for mp, b in d.resolve().items():
                if isinstance(b, str):
                    if b not in pmap:
                        problems.append(f"dataset {d.name or i}: model parameter {mp} bound to "
                                        f"unknown parameter {b!r}")
                    refs.setdefault(b, set()).add(i)
        for p in self.params:
            if p.shared and len(refs.get(p.name, ())) < 2:
                problems.append(f"parameter {p.name} declared shared but used by "
                                f"{len(refs.get(p.name, ()))} dataset(s)")
        n_free = sum(1 for p in self.params if not p.fixed and p.name in refs)
        m = sum(d.n_residuals for d in self.datasets)
        if m < n_free:
            problems.append(f"{m} residuals for {n_free} free parameters")
        if problems:
            raise FitError("invalid fit problem: " + "; ".join(problems))


@dataclass
class FitResult:
    values: dict
    sigma2: dict
    cost: float
    covariance: np.ndarray
    status: str
    free: list
    iterations: int = 0
    grad_norm: float = 0.0
    cost_history: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    message: str = ""
    n_residuals: int = 0

    def as_dict(self):
        return {"values": self.values, "sigma2": self.sigma2, "cost": self.cost,
                "covariance": np.asarray(self.covariance).tolist(), "free": self.free,
                "status": self.status, "iterations": self.iterations,
                "grad_norm": self.grad_norm, "frozen": self.frozen, "message": self.message}


def _stack(values, is_complex):
    if is_complex:
        return np.concatenate([values.real, values.imag])
    return np.asarray(values, dtype=float)


class _Evaluator:
    def __init__(self, problem: FitProblem, free):
        # canonical dataset order so permuted inputs give bit-identical sums
        self.datasets = sorted(problem.datasets, key=lambda d: d.key())
        self.pmap = {p.name: p for p in problem.params}
        self.free = list(free)
        self.scale = np.array([self.pmap[n].resolved_scale() for n in self.free])
        self.bindings = [d.resolve() for d in self.datasets]
        self.sqrt_w = [None if d.weights is None else np.sqrt(d.weights) for d in self.datasets]
        self.targets = [_stack(d.data, d.model.complex) for d in self.datasets]
        self.sizes = [t.size for t in self.targets]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.users = {n: [i for i, b in enumerate(self.bindings) if n in b.values()] for n in self.free}

    def values(self, u):
        vals = {n: p.value for n, p in self.pmap.items()}
        for n, x, s in zip(self.free, u, self.scale):
            vals[n] = x * s
        return vals

    def _params_for(self, i, vals):
        return {mp: (vals[b] if isinstance(b, str) else b) for mp, b in self.bindings[i].items()}

    def _weighted(self, i, r):
        w = self.sqrt_w[i]
        if w is None:
            return r
        return r * (np.concatenate([w, w]) if self.datasets[i].model.complex else w)

    def residual_block(self, i, vals):
        d = self.datasets[i]
        model = _stack(d.model.evaluate(d.coords, self._params_for(i, vals)), d.model.complex)
        return self._weighted(i, model - self.targets[i])

    def residuals(self, u):
        vals = self.values(u)
        return np.concatenate([self.residual_block(i, vals) for i in range(len(self.datasets))])

    def jacobian(self, u, lo, hi):
        vals = self.values(u)
        J = np.zeros((self.offsets[-1], len(self.free)))
        for i, d in enumerate(self.datasets):
            b = self.bindings[i]
            cols = [k for k, n in enumerate(self.free) if i in self.users[n]]
            if not cols:
                continue
            sl = slice(self.offsets[i], self.offsets[i + 1])
            mp_of = {}
            for k in cols:
                mp_of[k] = [mp for mp, g in b.items() if g == self.free[k]]
            if d.model.jacobian is not None:
                needed = sorted({mp for k in cols for mp in mp_of[k]})
                jac = d.model.jacobian(d.coords, self._params_for(i, vals), needed)
                for k in cols:
                    col = sum(jac[mp] for mp in mp_of[k]) * self.scale[k]
                    J[sl, k] = self._weighted(i, _stack(np.asarray(col), d.model.complex))
            else:
                for k in cols:
                    J[sl, k] = self._fd_column(i, u, k, lo, hi)
        return J

    def _fd_column(self, i, u, k, lo, hi):
        h = 1e-6 * max(1.0, abs(u[k]))
        up, dn = u.copy(), u.copy()
        up[k] = min(u[k] + h, hi[k])
        dn[k] = max(u[k] - h, lo[k])
        if up[k] == dn[k]:
            return np.zeros(self.sizes[i])
        rp = self.residual_block(i, self.values(up))
        rm = self.residual_block(i, self.values(dn))
        return (rp - rm) / (up[k] - dn[k])


def _check_identifiable(J, names):
    norms = np.linalg.norm(J, axis=0)
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        return list(names)
    return [n for n, c in zip(names, norms) if c < IDENT_TOL * top]


def fit(problem: FitProblem, ftol=FTOL, gtol=GTOL, max_iter=MAX_ITER,
        freeze_unidentifiable=False) -> FitResult:
    """Minimise the sum of squared residuals of ``problem``.

    Unidentifiable parameters (Jacobian column below 1e-12 of the largest)
    raise :class:`SingularJacobianError` or, with ``freeze_unidentifiable``,
    are held at their initial values and listed in ``FitResult.frozen``.
    """
    pmap = {p.name: p for p in problem.params}
    used = set()
    for d in problem.datasets:
        used.update(b for b in d.resolve().values() if isinstance(b, str))
    # sorted names: the same problem listed in another order gives identical bits
    free = sorted(p.name for p in problem.params if not p.fixed and p.name in used)
    frozen = []

    while True:
        ev = _Evaluator(problem, free)
        lo = np.array([pmap[n].lo for n in free]) / ev.scale
        hi = np.array([pmap[n].hi for n in free]) / ev.scale
        u = np.array([pmap[n].value for n in free]) / ev.scale
        r = ev.residuals(u)
        J = ev.jacobian(u, lo, hi)
        bad = _check_identifiable(J, free)
        if not bad:
            break
        if not freeze_unidentifiable:
            raise SingularJacobianError(bad)
        frozen += bad
        free = [n for n in free if n not in bad]

    data_norm2 = sum(float(np.sum(t * t)) for t in ev.targets)
    cost = float(r @ r)
    history = [cost]
    mu = 1e-3
    status = "max-iter"
    it = 0
    gnorm = np.inf

    def grad_measure(J, r):
        g = J.T @ r
        # treat components pinned at a bound and pushing outward as satisfied
        at_lo = (u <= lo) & (g > 0)
        at_hi = (u >= hi) & (g < 0)
        g = np.where(at_lo | at_hi, 0.0, g)
        denom = np.linalg.norm(J, axis=0) * np.sqrt(max(cost, 1e-300))
        return g, float(np.max(np.abs(g) / np.where(denom > 0, denom, 1.0))) if g.size else 0.0

    while it < max_iter:
        g, gnorm = grad_measure(J, r)
        if cost <= 1e-28 * max(data_norm2, 1e-300) or gnorm < gtol:
            status = "converged"
            break
        it += 1
        active = ((u <= lo) & (g > 0)) | ((u >= hi) & (g < 0))
        idx = np.flatnonzero(~active)
        A = J[:, idx].T @ J[:, idx]
        D = np.diag(A).copy()
        D[D == 0] = 1.0
        accepted = False
        while mu < 1e20:
            step = np.zeros_like(u)
            try:
                step[idx] = np.linalg.solve(A + mu * np.diag(D), -g[idx])
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            u_new = np.clip(u + step, lo, hi)
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = ev.residuals(u_new)
            c_new = float(r_new @ r_new)
            if np.isfinite(c_new) and c_new < cost:
                accepted = True
                break
            mu *= 4.0
        if not accepted:
            status = "converged"
            break
        rel = (cost - c_new) / cost
        u, r, cost = u_new, r_new, c_new
        history.append(cost)
        mu = max(mu / 3.0, 1e-15)
        with np.errstate(over="ignore", invalid="ignore"):
            J = ev.jacobian(u, lo, hi)
        if not np.all(np.isfinite(J)):
            status = "failed"
            break
        if rel < ftol:
            g, gnorm = grad_measure(J, r)
            status = "converged"
            break

    m, n = r.size, len(free)
    vals = ev.values(u)
    JTJ = J.T @ J
    try:
        cov_u = np.linalg.inv(JTJ)
    except np.linalg.LinAlgError:
        raise SingularJacobianError(free) from None
    absolute = problem.absolute_sigma
    if absolute is None:
        absolute = any(d.weights is not None for d in problem.datasets)
    s2 = 1.0 if absolute else (cost / (m - n) if m > n else np.nan)
    cov = s2 * cov_u * np.outer(ev.scale, ev.scale)
    cov = 0.5 * (cov + cov.T)
    sig = 2.0 * np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if frozen and status == "converged":
        status = "singular"
    msg = f"{status} after {it} iterations; final gradient measure {gnorm:.3g}"
    if status == "failed":
        msg += " (the model overflowed; start closer to the optimum or add bounds)"
    return FitResult(values={k: float(v) for k, v in vals.items()},
                     sigma2={k: float(s) for k, s in zip(free, sig)},
                     cost=cost, covariance=cov, status=status, free=free, iterations=it,
                     grad_norm=float(gnorm), cost_history=history, frozen=frozen, message=msg,
                     n_residuals=m)
