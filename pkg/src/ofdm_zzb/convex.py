"""ZZB minimisation over the (pinned) probability simplex.

The feasible set is ``{rho >= 0, sum rho = 1, rho[K0] = 0, rho[K1] = pin}``.
Each iteration minimises a quadratic model of the objective over that set
(a projected-Newton / SQP step) and backtracks along the step with the Armijo
rule, so accepted objectives never increase.  When the model step is not a
descent direction the iteration falls back to a projected-gradient step with a
Barzilai-Borwein trial length.

Curvature comes from the analytic Hessian for the coherent scheme.  For the
noncoherent scheme the model uses the exact second-order structure of
``lam = A_N(rho)`` with the scalar link ``P''(lam)`` taken by central
differences of the analytic slope.

The objective is normalised by its value at the starting point, which makes
the stopping rule (gradient-mapping residual with unit step) scale free.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import cvxopt
import numpy as np

from .bounds import BoundQuery, Grid, gaps_on_grid, quadrature_grid, zzb
from .derivatives import noncoherent_slope, zzb_and_grad
from .ofdm import DetectionScheme, DomainError

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 200
CAPPED_MAX_ITER = 30
DEFAULT_TOL = 1e-7
ARMIJO = 1e-4


class InfeasibleError(DomainError):
    """The pin sets admit no allocation."""


class NumericalError(ArithmeticError):
    """The objective or its gradient became non-finite."""


@dataclass(frozen=True)
class ConvexProblem:
    """Relaxed allocation problem with optional pinned subcarriers.

    Empty pin sets give the plain simplex-constrained problem.
    """

    query: BoundQuery
    pinned_zero: frozenset = frozenset()
    pinned_power: frozenset = frozenset()
    pin_level: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pinned_zero", frozenset(int(k) for k in self.pinned_zero))
        object.__setattr__(self, "pinned_power", frozenset(int(k) for k in self.pinned_power))
        K = self.query.cfg.K
        if self.pinned_zero & self.pinned_power:
            raise InfeasibleError("a subcarrier cannot be pinned to zero and to power")
        for k in self.pinned_zero | self.pinned_power:
            if not 0 <= k < K:
                raise DomainError(f"pinned index {k} outside [0, {K})")
        if self.pinned_power and not self.pin_level > 0:
            raise DomainError("pin_level must be positive when subcarriers are pinned")
        if self.free_mass < -1e-12:
            raise InfeasibleError(
                f"{len(self.pinned_power)} pins at {self.pin_level} exceed the power budget"
            )
        if self.free_mass > 1e-12 and not self.free_indices.size:
            raise InfeasibleError("no free subcarrier can take the remaining power")

    @property
    def free_mass(self) -> float:
        return 1.0 - len(self.pinned_power) * self.pin_level

    @property
    def free_indices(self) -> np.ndarray:
        pinned = self.pinned_zero | self.pinned_power
        return np.array([k for k in range(self.query.cfg.K) if k not in pinned], dtype=int)

    def uniform_start(self) -> np.ndarray:
        rho = np.zeros(self.query.cfg.K)
        free = self.free_indices
        if free.size:
            rho[free] = max(self.free_mass, 0.0) / free.size
        rho[sorted(self.pinned_power)] = self.pin_level
        return rho


@dataclass
class SolveReport:
    rho_star: np.ndarray
    objective: float
    iterations: int
    first_order_residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def project_simplex(v, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = mass}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if mass <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    k = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0.0)


def project_constrained_simplex(v, problem: ConvexProblem) -> np.ndarray:
    """Nearest feasible allocation to ``v`` under the problem's pin sets."""
    v = np.asarray(v, dtype=float)
    if v.shape != (problem.query.cfg.K,):
        raise DomainError(f"vector must have {problem.query.cfg.K} entries")
    out = np.zeros_like(v)
    free = problem.free_indices
    if free.size:
        out[free] = project_simplex(v[free], problem.free_mass)
    if problem.pinned_power:
        out[sorted(problem.pinned_power)] = problem.pin_level
    return out


class _Objective:
    """Normalised ZZB with a full-length gradient whose index-0 entry is zero.

    On the simplex the gradient is defined only up to a multiple of the ones
    vector; ``[0, grad_rho_t]`` is the representative used throughout, and the
    Hessian is padded the same way.
    """

    def __init__(self, query: BoundQuery, scale: float):
        self.q = query
        self.grid: Grid = quadrature_grid(query.cfg, query.quad)
        self.scale = scale
        self.evals = 0

    def __call__(self, rho):
        self.evals += 1
        value, g, _ = zzb_and_grad(rho, self.q, self.grid)
        f = value / self.scale
        gfull = np.concatenate(([0.0], g)) / self.scale
        if not np.isfinite(f) or not np.all(np.isfinite(gfull)):
            raise NumericalError(f"non-finite objective or gradient at gamma={self.q.gamma}")
        return f, gfull

    def hessian(self, rho) -> np.ndarray:
        if self.q.scheme is DetectionScheme.COHERENT:
            _, _, h = zzb_and_grad(rho, self.q, self.grid, hessian=True)
        else:
            h = self._noncoherent_model_hessian(rho)
        out = np.zeros((rho.size, rho.size))
        out[1:, 1:] = h / self.scale
        return out

    def _noncoherent_model_hessian(self, rho):
        grid, gamma = self.grid, self.q.gamma
        csum, ssum, gap = gaps_on_grid(rho, grid, DetectionScheme.NONCOHERENT)
        lam = csum * csum + ssum * ssum
        step = 1e-7
        lo = np.clip(lam - step, 0.0, 1.0)
        hi = np.clip(lam + step, 0.0, 1.0)
        curv = (noncoherent_slope(hi, gamma) - noncoherent_slope(lo, gamma)) / np.maximum(hi - lo, 1e-300)
        curv = np.maximum(curv, 0.0)
        slope = np.maximum(noncoherent_slope(lam, gamma, gap), 0.0)
        w = self.q.cfg.Ts**2 * grid.weights
        cm1 = -grid.omc[:, 1:]
        sn = grid.sin[:, 1:]
        # both weights are >= 0, so H = M^T M with M stacked from three blocks
        a = np.sqrt(w * curv)[:, None]
        b = np.sqrt(2 * w * slope)[:, None]
        dlam = 2 * csum[:, None] * cm1 + 2 * ssum[:, None] * sn
        m = np.concatenate((a * dlam, b * cm1, b * sn))
        h = m.T @ m
        return 0.5 * (h + h.T)


def gradient_mapping_residual(rho, g, problem: ConvexProblem) -> float:
    return float(np.linalg.norm(rho - project_constrained_simplex(rho - g, problem)))


def _model_step(rho, g, hess, free) -> np.ndarray | None:
    """Minimiser ``d`` of ``g.d + d.H.d/2`` with ``rho + d`` feasible.

    Only free coordinates move; their sum is preserved.
    """
    m = free.size
    if m < 2:
        return None
    H = hess[np.ix_(free, free)]
    ridge = 1e-10 * max(float(np.max(np.diag(H))), 1e-300)
    P = cvxopt.matrix(H + ridge * np.eye(m))
    q = cvxopt.matrix(g[free])
    G = cvxopt.matrix(-np.eye(m))
    h = cvxopt.matrix(rho[free].copy())
    A = cvxopt.matrix(np.ones((1, m)))
    b = cvxopt.matrix(0.0)
    opts = {"show_progress": False, "abstol": 1e-14, "reltol": 1e-12, "feastol": 1e-12, "maxiters": 100}
    try:
        sol = cvxopt.solvers.qp(P, q, G, h, A, b, options=opts)
    except (ValueError, ArithmeticError) as exc:
        log.debug("model QP failed: %s", exc)
        return None
    if sol["x"] is None:
        return None
    d = np.zeros_like(rho)
    d[free] = np.asarray(sol["x"]).ravel()
    return d


def _armijo(obj, problem, rho, f, g, direction, t0=1.0, t_min=1e-12):
    """Backtrack along ``rho + t d``; return the accepted point or None."""
    t = t0
    slope = float(g @ direction)
    if not slope < 0:
        return None
    while t >= t_min:
        cand = project_constrained_simplex(rho + t * direction, problem)
        fc, gc = obj(cand)
        if fc <= f + ARMIJO * float(g @ (cand - rho)) and fc <= f:
            return cand, fc, gc
        t *= 0.5
    return None


def _gradient_step(obj, problem, rho, f, g, step):
    t = step
    while t > 1e-30:
        cand = project_constrained_simplex(rho - t * g, problem)
        dx = cand - rho
        if not np.any(dx):
            return None
        fc, gc = obj(cand)
        if fc <= f + ARMIJO * float(g @ dx) and fc <= f:
            return cand, fc, gc
        t *= 0.5
    return None


def solve(
    problem: ConvexProblem,
    init=None,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SolveReport:
    """Minimise the ZZB over the problem's feasible set.

    ``init`` is projected onto the feasible set first; without it the solve
    starts from uniform power over the free subcarriers.  The report's
    objective is in seconds squared.
    """
    q = problem.query
    rho = problem.uniform_start() if init is None else project_constrained_simplex(init, problem)
    f0 = zzb(rho, q)
    if not np.isfinite(f0) or f0 <= 0:
        raise NumericalError(f"objective {f0!r} at the starting point")
    free = problem.free_indices
    if q.gamma == 0 or free.size < 2:
        return SolveReport(rho, f0, 0, 0.0, True, [f0])

    obj = _Objective(q, f0)
    f, g = obj(rho)
    history = [f0]
    step = 1.0 / max(float(np.linalg.norm(g)), 1e-300)
    res = gradient_mapping_residual(rho, g, problem)
    it = 0
    while it < max_iter and res > tol:
        it += 1
        accepted = None
        d = _model_step(rho, g, obj.hessian(rho), free)
        if d is not None:
            accepted = _armijo(obj, problem, rho, f, g, d)
        if accepted is None:
            accepted = _gradient_step(obj, problem, rho, f, g, step)
        if accepted is None:
            log.debug("no descent step at iteration %d (residual %.3g)", it, res)
            break
        cand, fc, gc = accepted
        s, y = cand - rho, gc - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1.0 / max(float(np.linalg.norm(gc)), 1e-300)
        rho, f, g = cand, fc, gc
        history.append(f * f0)
        res = gradient_mapping_residual(rho, g, problem)
    return SolveReport(rho, f * f0, it, res, res <= tol, history)
