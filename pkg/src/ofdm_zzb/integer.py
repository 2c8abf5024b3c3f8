"""Branch-and-bound for L-subcarrier equal-power pilot allocations.

Lower bounds come from the pinned convex relaxation, upper bounds from
rounding each relaxed solution to its L strongest subcarriers.  Nodes are
explored best-first (smallest lower bound), ties in insertion order.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundQuery, zzb
from .convex import DEFAULT_MAX_ITER, ConvexProblem, InfeasibleError, NumericalError, solve
from .ofdm import DetectionScheme, DomainError, subcarrier_index

log = logging.getLogger(__name__)

AUTO = "auto"


def default_anchor(scheme: DetectionScheme, K: int) -> int | None:
    """Subcarrier pinned to ``1/L`` before the search starts.

    The noncoherent bound only sees relative subcarrier positions, and any
    support can be shifted down until its lowest subcarrier sits at
    ``d = -K/2``; pinning that subcarrier therefore loses nothing.  Coherent
    searches pin nothing.
    """
    if DetectionScheme.parse(scheme) is DetectionScheme.NONCOHERENT:
        return subcarrier_index(-(K // 2), K)
    return None


@dataclass(frozen=True)
class BnbConfig:
    L: int = 8
    delta_tol: float = 0.01
    n_iter: int = 2000
    pin_anchor: int | str | None = AUTO
    max_solver_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"L must be a positive integer, got {self.L}")
        if not self.delta_tol > 0:
            raise DomainError("delta_tol must be positive")
        if self.n_iter < 1:
            raise DomainError("n_iter must be >= 1")
        if isinstance(self.pin_anchor, str) and self.pin_anchor != AUTO:
            raise DomainError(f"pin_anchor must be an index, None or {AUTO!r}")

    def anchor(self, scheme: DetectionScheme, K: int) -> int | None:
        if self.pin_anchor == AUTO:
            return default_anchor(scheme, K)
        return None if self.pin_anchor is None else int(self.pin_anchor)


@dataclass
class Subproblem:
    pinned_zero: frozenset
    pinned_power: frozenset
    relaxed_solution: np.ndarray
    lower_bound: float


@dataclass
class BnbReport:
    rho_star: np.ndarray
    upper_bound: float
    best_lower_bound: float
    gap: float
    iterations: int
    nodes_explored: int
    ub_history: list = field(default_factory=list, repr=False)
    lb_history: list = field(default_factory=list, repr=False)
    unconverged_relaxations: int = 0


def round_max_l(rho, L: int, forced=()) -> np.ndarray:
    """Equal power ``1/L`` on the ``L`` strongest subcarriers, zero elsewhere.

    Ties go to the lowest index.  Indices in ``forced`` are taken first.
    """
    rho = np.asarray(rho, dtype=float)
    K = rho.size
    if not 1 <= L <= K:
        raise DomainError(f"L={L} outside [1, {K}]")
    forced = sorted(set(int(k) for k in forced))
    if len(forced) > L:
        raise DomainError("more forced subcarriers than L")
    order = [int(k) for k in np.lexsort((np.arange(K), -rho)) if k not in forced]
    support = forced + order[: L - len(forced)]
    out = np.zeros(K)
    out[support] = 1.0 / L
    return out


def branch_index(sub: Subproblem, L: int) -> int:
    """Free subcarrier whose relaxed power is closest to ``1/(2L)``."""
    K = sub.relaxed_solution.size
    pinned = sub.pinned_zero | sub.pinned_power
    free = np.array([k for k in range(K) if k not in pinned], dtype=int)
    if not free.size:
        raise DomainError("no free subcarrier left to branch on")
    dist = np.abs(sub.relaxed_solution[free] - 0.5 / L)
    return int(free[np.argmin(dist)])


class _Search:
    def __init__(self, query: BoundQuery, bnb: BnbConfig):
        self.q = query
        self.bnb = bnb
        self.K = query.cfg.K
        self.L = int(bnb.L)
        self.unconverged = 0

    def feasible(self, k0, k1) -> bool:
        return len(k1) <= self.L and self.K - len(k0) >= self.L

    def relax(self, k0, k1, init) -> Subproblem | None:
        if not self.feasible(k0, k1):
            return None
        try:
            prob = ConvexProblem(self.q, k0, k1, 1.0 / self.L if k1 else 0.0)
        except InfeasibleError:
            return None
        try:
            rep = solve(prob, init, max_iter=self.bnb.max_solver_iter)
        except NumericalError as exc:
            raise NumericalError(f"relaxation failed at K0={sorted(k0)} K1={sorted(k1)}: {exc}") from exc
        if not rep.converged:
            self.unconverged += 1
        return Subproblem(frozenset(k0), frozenset(k1), rep.rho_star, rep.objective)

    def rounded(self, sub: Subproblem):
        rho = round_max_l(sub.relaxed_solution, self.L, sub.pinned_power)
        return rho, zzb(rho, self.q)


def solve_bnb(query: BoundQuery, bnb: BnbConfig = BnbConfig()) -> BnbReport:
    """Best-first branch-and-bound over equal-power L-subcarrier supports."""
    K, L = query.cfg.K, int(bnb.L)
    if L > K:
        raise InfeasibleError(f"L={L} exceeds K={K}")
    anchor = bnb.anchor(query.scheme, K)
    if anchor is not None and not 0 <= anchor < K:
        raise DomainError(f"anchor {anchor} outside [0, {K})")
    search = _Search(query, bnb)
    k1 = frozenset() if anchor is None else frozenset({anchor})
    root = search.relax(frozenset(), k1, None)
    if root is None:
        raise InfeasibleError("root relaxation is infeasible")

    rho_best, ub = search.rounded(root)
    tie = itertools.count()
    queue = [(root.lower_bound, next(tie), root)]
    ub_hist, lb_hist = [ub], []
    it = nodes = 0
    gap = np.inf
    best_lb = root.lower_bound
    while it < bnb.n_iter:
        if not queue:
            # exhaustive: every open node was pruned against the incumbent
            gap, best_lb = 0.0, ub
            break
        lb, _, node = heapq.heappop(queue)
        nodes += 1
        lb_hist.append(lb)
        best_lb = min(lb, ub)
        gap = max((ub - lb) / lb, 0.0)
        if gap <= bnb.delta_tol:
            break
        pinned = node.pinned_zero | node.pinned_power
        if len(pinned) == K:
            continue
        kb = branch_index(node, L)
        children = (
            (node.pinned_zero | {kb}, node.pinned_power),
            (node.pinned_zero, node.pinned_power | {kb}),
        )
        for c0, c1 in children:
            child = search.relax(c0, c1, node.relaxed_solution)
            if child is None:
                continue
            rho_c, ub_c = search.rounded(child)
            if ub_c < ub:
                ub, rho_best = ub_c, rho_c
            if child.lower_bound < ub:
                heapq.heappush(queue, (child.lower_bound, next(tie), child))
        ub_hist.append(ub)
        it += 1
        # heads beaten by the incumbent go now; deeper ones are caught at pop
        while queue and queue[0][0] >= ub:
            heapq.heappop(queue)
    log.info("bnb: %d iterations, %d nodes, gap %.3g", it, nodes, gap)
    return BnbReport(
        rho_star=rho_best,
        upper_bound=ub,
        best_lower_bound=best_lb,
        gap=float(gap),
        iterations=it,
        nodes_explored=nodes,
        ub_history=ub_hist,
        lb_history=lb_hist,
        unconverged_relaxations=search.unconverged,
    )


def brute_force(query: BoundQuery, L: int, anchor: int | None = None):
    """Exhaustive search over all equal-power L-subsets (small K only).

    Returns ``(best_rho, best_zzb)``; with an anchor only subsets containing
    it are visited.
    """
    K = query.cfg.K
    if not 1 <= L <= K:
        raise DomainError(f"L={L} outside [1, {K}]")
    best, best_val = None, np.inf
    for support in itertools.combinations(range(K), L):
        if anchor is not None and anchor not in support:
            continue
        rho = np.zeros(K)
        rho[list(support)] = 1.0 / L
        val = zzb(rho, query)
        if val < best_val:
            best, best_val = rho, val
    return best, best_val
