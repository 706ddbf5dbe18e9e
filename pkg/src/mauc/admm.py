"""Consensus ADMM over area subproblems sharing boundary angles and tie-line flows."""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import AreaView, NetworkCase, partition_areas
from .qp import OPTIMAL, QuadraticProgram, solve_qp
from .uc import (AlgoParams, CommitmentSchedule, UcVariableLayout, build_ed, build_relaxed_subproblem,
                 cost_eval)


# $/MW^2 pull of the reconciled dispatch towards the ADMM iterate; larger
# weights make the reconciliation QP badly scaled
RECONCILE_WEIGHT = 1.0


class ConsensusError(ValueError):
    pass


class ConsensusTopology:
    """Global ordering of consensus quantities and each area's slice of it.

    Shared angles are ordered (bus, hour) with buses in case order; tie flows
    (tie-line, hour) with ties in case order.
    """

    def __init__(self, case: NetworkCase, views: list[AreaView] | None = None):
        self.case = case
        self.views = views if views is not None else partition_areas(case)
        self.T = case.horizon
        view_shared = {b for v in self.views for b in v.shared_buses}
        self.shared_buses = [b.id for b in case.buses if b.id in view_shared]
        view_ties = {t for v in self.views for t in v.tie_lines}
        self.tie_ids = [br.id for br in case.branches if br.id in view_ties]
        s_pos = {b: k for k, b in enumerate(self.shared_buses)}
        t_pos = {b: k for k, b in enumerate(self.tie_ids)}
        self.area_ids = [v.area_id for v in self.views]
        self.angle_slices = {}
        self.flow_slices = {}
        for v in self.views:
            self.angle_slices[v.area_id] = np.array(
                [s_pos[b] * self.T + t for b in v.shared_buses for t in range(self.T)], dtype=int)
            self.flow_slices[v.area_id] = np.array(
                [t_pos[l] * self.T + t for l in v.tie_lines for t in range(self.T)], dtype=int)
        n_s = len(self.shared_buses) * self.T
        n_f = len(self.tie_ids) * self.T
        self.angle_count = np.zeros(n_s)
        self.flow_count = np.zeros(n_f)
        for a in self.area_ids:
            np.add.at(self.angle_count, self.angle_slices[a], 1.0)
            np.add.at(self.flow_count, self.flow_slices[a], 1.0)

    @property
    def n_angles(self) -> int:
        return len(self.shared_buses) * self.T

    @property
    def n_flows(self) -> int:
        return len(self.tie_ids) * self.T

    def zeros(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {a: (np.zeros(self.angle_slices[a].size), np.zeros(self.flow_slices[a].size))
                for a in self.area_ids}


@dataclass
class ConsensusState:
    theta_bar: np.ndarray  # (n_shared * T,)
    F_bar: np.ndarray  # (n_ties * T,)

    def for_area(self, topo: ConsensusTopology, area: str) -> tuple[np.ndarray, np.ndarray]:
        return self.theta_bar[topo.angle_slices[area]], self.F_bar[topo.flow_slices[area]]

    def copy(self) -> "ConsensusState":
        return ConsensusState(self.theta_bar.copy(), self.F_bar.copy())


@dataclass
class AdmmState:
    """Per-area relaxed solutions and multipliers.

    ``x`` holds the unprojected subproblem solutions; the dual update always
    uses these, never a projected point.
    """

    x: dict[str, np.ndarray]
    lam: dict[str, np.ndarray]
    mu: dict[str, np.ndarray]
    iteration: int = 0
    history: list[dict] = field(default_factory=list)

    @classmethod
    def zeros(cls, topo: ConsensusTopology) -> "AdmmState":
        z = topo.zeros()
        return cls({}, {a: z[a][0].copy() for a in z}, {a: z[a][1].copy() for a in z})


def consensus_update(local: dict[str, tuple[np.ndarray, np.ndarray]], topo: ConsensusTopology) -> ConsensusState:
    """Average each shared angle over the areas viewing it and each tie flow over its two sides.

    ``local`` maps area id to (shared angles, tie flows) in that area's
    ordering.
    """
    th = np.zeros(topo.n_angles)
    fl = np.zeros(topo.n_flows)
    for a in topo.area_ids:  # fixed order for reproducible summation
        if a not in local:
            raise ConsensusError(f"missing contribution from area {a!r}")
        ang, flo = local[a]
        if ang.size != topo.angle_slices[a].size or flo.size != topo.flow_slices[a].size:
            raise ConsensusError(f"area {a!r} contribution has wrong length")
        np.add.at(th, topo.angle_slices[a], ang)
        np.add.at(fl, topo.flow_slices[a], flo)
    with np.errstate(invalid="ignore", divide="ignore"):
        th = np.where(topo.angle_count > 0, th / np.maximum(topo.angle_count, 1), 0.0)
        fl = np.where(topo.flow_count > 0, fl / np.maximum(topo.flow_count, 1), 0.0)
    return ConsensusState(th, fl)


def dual_update(state: AdmmState, local: dict[str, tuple[np.ndarray, np.ndarray]], consensus: ConsensusState,
                topo: ConsensusTopology, rho: float, rho_flow: float | None = None) -> AdmmState:
    rho_flow = rho if rho_flow is None else rho_flow
    lam, mu = {}, {}
    for a in topo.area_ids:
        tb, fb = consensus.for_area(topo, a)
        ang, flo = local[a]
        lam[a] = state.lam[a] + rho * (ang - tb)
        mu[a] = state.mu[a] + rho_flow * (flo - fb)
    return AdmmState(state.x, lam, mu, state.iteration, state.history)


@dataclass
class Residual:
    r: dict[str, np.ndarray]
    s: dict[str, np.ndarray]

    @staticmethod
    def _norm(parts, ord):
        v = np.concatenate([p for p in parts.values()]) if parts else np.zeros(0)
        if v.size == 0:
            return 0.0
        return float(np.abs(v).max() if ord == "inf" else np.linalg.norm(v))

    @property
    def r_inf(self) -> float:
        return self._norm(self.r, "inf")

    @property
    def r_2(self) -> float:
        return self._norm(self.r, 2)

    @property
    def s_inf(self) -> float:
        return self._norm(self.s, "inf")

    @property
    def s_2(self) -> float:
        return self._norm(self.s, 2)


def residual(local: dict[str, tuple[np.ndarray, np.ndarray]], consensus: ConsensusState, topo: ConsensusTopology,
             previous: ConsensusState | None = None, rho: float = 1.0,
             rho_flow: float | None = None) -> Residual:
    """Primal residual (local minus consensus) and dual residual (consensus change times -rho)."""
    rho_flow = rho if rho_flow is None else rho_flow
    r, s = {}, {}
    for a in topo.area_ids:
        tb, fb = consensus.for_area(topo, a)
        ang, flo = local[a]
        r[a] = np.concatenate([ang - tb, flo - fb])
        if previous is None:
            s[a] = np.zeros_like(r[a])
        else:
            tp, fp = previous.for_area(topo, a)
            s[a] = np.concatenate([-rho * (tb - tp), -rho_flow * (fb - fp)])
    return Residual(r, s)


# ---------------------------------------------------------------------------
# distributed dispatch


@dataclass
class EdOutcome:
    converged: bool
    iterations: int
    r_inf: float
    s_inf: float
    cause: str = ""
    p: np.ndarray | None = None  # above-min output, case generator order
    theta: np.ndarray | None = None  # (n_buses, T), from the boundary-fixed pass
    duals: dict[str, np.ndarray] = field(default_factory=dict)  # area -> (n_internal, T) balance duals
    dispatch_cost: float = np.inf  # energy cost of p
    admm_dispatch_cost: float = np.inf  # energy cost of the last ADMM iterate
    consensus: ConsensusState | None = None
    trace: list[dict] = field(default_factory=list)


class _AreaEd:
    def __init__(self, case, view, schedule):
        self.view = view
        self.qp, self.lay = build_ed(case, view, schedule)


def _map(executor, fn, items):
    if executor is None:
        return [fn(it) for it in items]
    return list(executor.map(fn, items))


def _local(lay: UcVariableLayout, x: np.ndarray):
    return lay.shared_values(x), lay.tie_flows(x)


def run_consensus_ed(case: NetworkCase, schedule: CommitmentSchedule, params: AlgoParams,
                     topo: ConsensusTopology | None = None, *, eps: float | None = None,
                     max_iter: int | None = None, executor: ThreadPoolExecutor | None = None,
                     restart: int = -1, phase: str = "ed") -> EdOutcome:
    """Distributed dispatch at a fixed commitment.

    Starts from zero consensus and multipliers, so the outcome depends only on
    the commitment and parameters.  Stops once both the boundary mismatch
    ``r`` and the consensus change ``s / rho`` are at most ``eps`` (the primal
    test alone ends early at large ``rho``, before the prices settle).  The
    dispatch is then reconciled by one proximal step onto the full network
    so that the whole system balances exactly.
    """
    topo = topo or ConsensusTopology(case)
    eps = params.eps_ed if eps is None else eps
    max_iter = params.n_ed if max_iter is None else max_iter
    rho = params.rho_ed
    areas = [_AreaEd(case, v, schedule) for v in topo.views]
    cons = ConsensusState(np.zeros(topo.n_angles), np.zeros(topo.n_flows))
    state = AdmmState.zeros(topo)
    trace = []
    sols = {}
    res = Residual({}, {})
    t0 = time.perf_counter()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        def solve_area(ar: _AreaEd):
            a = ar.view.area_id
            tb, fb = cons.for_area(topo, a)
            qp = build_relaxed_subproblem(ar.qp, ar.lay, state.lam[a], state.mu[a], tb, fb, rho)
            return solve_qp(qp, tol=params.qp_tol, check_psd=False)

        results = _map(executor, solve_area, areas)
        for ar, sol in zip(areas, results):
            if sol.status != OPTIMAL:
                return EdOutcome(False, it, np.inf, np.inf, cause=f"area {ar.view.area_id}: ED {sol.status}",
                                 trace=trace)
            sols[ar.view.area_id] = sol
        local = {ar.view.area_id: _local(ar.lay, sols[ar.view.area_id].x) for ar in areas}
        new = consensus_update(local, topo)
        res = residual(local, new, topo, cons, rho)
        state = dual_update(state, local, new, topo, rho)
        cons = new
        trace.append({"phase": phase, "restart": restart, "iteration": it, "area": "*",
                      "objective": float(sum(s.objective for s in sols.values())),
                      "r_inf": res.r_inf, "s_inf": res.s_inf, "wall_time": time.perf_counter() - t0})
        if res.r_inf <= eps and res.s_inf <= eps * rho:
            converged = True
            break

    out = EdOutcome(converged, it, res.r_inf, res.s_inf, trace=trace, consensus=cons)
    out.duals = {ar.view.area_id: sols[ar.view.area_id].duals_eq[ar.lay.balance_rows] for ar in areas}
    p_admm = _collect_p(case, areas, {a: s.x for a, s in sols.items()})
    out.admm_dispatch_cost = cost_eval(case, schedule, p_admm).energy
    if not converged:
        out.cause = (f"no consensus after {it} iterations (mismatch {res.r_inf:.3g}, "
                     f"consensus change {res.s_inf / rho:.3g}; tolerance {eps:g})")
        return out

    # reconciliation: a proximal step from the ADMM iterate onto the full
    # network (consensus is only met to eps, so the iterate itself does not
    # balance the system exactly)
    sol = _project_dispatch(case, schedule, p_admm, params.qp_tol)
    if sol is None:
        out.converged = False
        out.cause = "no network-feasible dispatch near the ADMM iterate"
        return out
    out.p, out.theta = sol
    out.dispatch_cost = cost_eval(case, schedule, out.p).energy
    return out


def _project_dispatch(case, schedule, p_target, tol, weight=RECONCILE_WEIGHT):
    """Network-feasible dispatch minimizing energy cost + weight/2 * ||p - p_target||^2.

    A plain Euclidean projection is degenerate wherever the target sits on a
    bound with a zero multiplier and the interior-point solve then stalls
    ~1e-3 MW away; the cost term makes those bounds strictly active.
    """
    qp, lay = build_ed(case, None, schedule)
    gpos = {g.id: k for k, g in enumerate(case.generators)}
    order = [gpos[g] for g in lay.gen_ids]
    p_target = p_target[order]
    idx = lay.p.ravel()
    w = np.zeros(lay.n)
    w[idx] = weight
    c = qp.c.copy()
    c[idx] -= weight * p_target.ravel()
    proj = dataclasses.replace(qp, Q=qp.Q + sp.diags(w, format="csr"), c=c,
                               offset=qp.offset + 0.5 * weight * float(p_target.ravel() @ p_target.ravel()))
    sol = solve_qp(proj, tol=tol, check_psd=False)
    if sol.status != OPTIMAL:
        return None
    p = np.zeros_like(p_target)
    p[order] = np.maximum(sol.x[lay.p], 0.0)
    th = np.zeros((case.n_buses, case.horizon))
    for k, bid in enumerate(lay.bus_ids):
        th[case.bus_index[bid]] = sol.x[lay.theta[k]]
    return p, th


def _collect_p(case, areas, xs):
    gpos = {g.id: k for k, g in enumerate(case.generators)}
    p = np.zeros((case.n_gens, case.horizon))
    for ar in areas:
        x = xs[ar.view.area_id]
        for k, gid in enumerate(ar.lay.gen_ids):
            p[gpos[gid]] = np.maximum(x[ar.lay.p[k]], 0.0)
    return p
