"""Best-first branch and bound over the binary variables of a convex MIQP."""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .qp import DEFAULT_TOL, OPTIMAL, QuadraticProgram, QpSolution, solve_qp
from .uc import MixedIntegerQp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
GAP_LIMIT = "gap-limit"


@dataclass
class MiqpSolution:
    x: np.ndarray | None
    objective: float
    status: str
    proven_gap: float
    nodes_explored: int
    incumbent_history: list[float] = field(default_factory=list)
    qp_solution: QpSolution | None = None


def fix_binaries(p: MixedIntegerQp, values: np.ndarray) -> QuadraticProgram:
    lo = p.qp.lower.copy()
    up = p.qp.upper.copy()
    lo[p.binary_indices] = values
    up[p.binary_indices] = values
    return p.qp.with_bounds(lo, up)


def _solve_fixed(p, values, tol):
    vals = np.rint(values)
    sol = solve_qp(fix_binaries(p, vals), tol=tol, check_psd=False)
    if sol.status == OPTIMAL:
        sol.x[p.binary_indices] = vals
    return sol


def solve_miqp(p: MixedIntegerQp, rel_gap: float = 0.0, node_limit: int = 200_000,
               tol: float = DEFAULT_TOL, heuristic_every: int = 25) -> MiqpSolution:
    """Minimize over binaries by best-first branch and bound.

    Branches on the most fractional binary (lowest index on ties), down
    branch first; open nodes are ordered by parent bound, FIFO among equals.
    A node is pruned when its bound is within ``rel_gap`` of the incumbent.
    """
    p.qp.check_psd()
    bins = p.binary_indices
    base_lo = p.qp.lower.copy()
    base_up = p.qp.upper.copy()
    inc_x, inc_obj, inc_sol = None, np.inf, None
    history = []
    seq = itertools.count()

    def cutoff():
        if not np.isfinite(inc_obj):
            return np.inf
        return inc_obj - rel_gap * abs(inc_obj) - 1e-9 * max(1.0, abs(inc_obj))

    def try_incumbent(values):
        nonlocal inc_x, inc_obj, inc_sol
        sol = _solve_fixed(p, values, tol)
        if sol.status == OPTIMAL and (inc_x is None or sol.objective < inc_obj - 1e-12 * max(1.0, abs(inc_obj))):
            inc_x, inc_obj, inc_sol = sol.x, sol.objective, sol
            history.append(inc_obj)
            log.debug("incumbent %.6f", inc_obj)

    # open node: (parent bound, sequence, fixes)
    heap = [(-np.inf, next(seq), ())]
    nodes = 0
    root_bound = None
    while heap:
        bound, _, fixes = heap[0]
        if bound >= cutoff():
            break
        if nodes >= node_limit:
            break
        heapq.heappop(heap)
        nodes += 1
        lo, up = base_lo.copy(), base_up.copy()
        for idx, val in fixes:
            lo[idx] = up[idx] = val
        sol = solve_qp(p.qp.with_bounds(lo, up), tol=tol, check_psd=False)
        if sol.status != OPTIMAL:
            if not fixes and sol.status != "infeasible":
                log.warning("root relaxation ended with status %s", sol.status)
            continue
        if root_bound is None:
            root_bound = sol.objective
        if sol.objective >= cutoff():
            continue
        xb = sol.x[bins]
        frac = np.abs(xb - np.rint(xb))
        if np.all(frac <= INT_TOL):
            try_incumbent(xb)
            continue
        if heuristic_every and (nodes == 1 or nodes % heuristic_every == 0):
            try_incumbent(np.where(xb > 0.5, 1.0, 0.0))  # halves round down, like the branching
            try_incumbent(np.where(xb > INT_TOL, 1.0, 0.0))
            if sol.objective >= cutoff():
                continue
        score = np.where(frac > INT_TOL, np.abs(xb - 0.5), np.inf)
        k = int(np.argmin(score))
        j = int(bins[k])
        for val in (0.0, 1.0):
            heapq.heappush(heap, (sol.objective, next(seq), fixes + ((j, val),)))

    if inc_x is None:
        status = "infeasible" if not heap else GAP_LIMIT
        return MiqpSolution(None, np.inf, status, np.inf, nodes, history)
    open_bound = min((b for b, _, _ in heap), default=inc_obj)
    best_bound = min(open_bound, inc_obj)
    gap = max(0.0, (inc_obj - best_bound) / max(1.0, abs(inc_obj)))
    status = OPTIMAL if gap <= rel_gap + 1e-9 else GAP_LIMIT
    return MiqpSolution(inc_x, inc_obj, status, gap, nodes, history, inc_sol)
