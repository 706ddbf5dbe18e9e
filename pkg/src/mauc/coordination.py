"""Multi-area commitment heuristic: relaxed-UC ADMM, threshold projection, repair,
distributed dispatch check, and best-solution retention."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .admm import (AdmmState, ConsensusState, ConsensusTopology, EdOutcome, consensus_update, dual_update,
                   residual, run_consensus_ed)
from .model import NetworkCase, natural_key
from .qp import OPTIMAL, solve_qp
from .uc import (AlgoParams, CommitmentSchedule, CostBreakdown, build_ed, build_relaxed_subproblem, build_uc,
                 cost_eval, logic_violations, reconstruct_flags, total_output)

log = logging.getLogger(__name__)

SINGLE = "single"
UNCOORDINATED = "uncoordinated"
COORDINATED = "coordinated"


@dataclass
class ClearingResult:
    method: str
    feasible: bool
    schedule: CommitmentSchedule | None = None
    p: np.ndarray | None = None  # output above minimum (G, T)
    flows: np.ndarray | None = None  # MW per branch-hour, case branch order
    lmps: np.ndarray | None = None  # (n_buses, T)
    lmp_by_area: dict = field(default_factory=dict)  # area -> {bus: (T,)} as computed by that area
    cost: CostBreakdown | None = None
    trace: list[dict] = field(default_factory=list)
    converged: bool = False
    best_restart: int | None = None
    best_iteration: int | None = None
    wall_time: float = 0.0
    message: str = ""
    info: dict = field(default_factory=dict)

    @property
    def cost_total(self) -> float:
        return self.cost.total if self.cost is not None else float("inf")

    def output(self, case: NetworkCase) -> np.ndarray:
        return total_output(case, self.schedule, self.p)


def branch_flows(case: NetworkCase, theta: np.ndarray) -> np.ndarray:
    """MW flow on every branch (from -> to) given bus angles (n_buses, T)."""
    out = np.zeros((len(case.branches), case.horizon))
    for k, br in enumerate(case.branches):
        i, j = case.bus_index[br.from_bus], case.bus_index[br.to_bus]
        out[k] = case.base_mva * (theta[i] - theta[j]) / br.reactance
    return out


# ---------------------------------------------------------------------------
# projection and repair


def project_commitment(u_relaxed: np.ndarray, xi: float) -> np.ndarray:
    if not 0 < xi < 1:
        raise ValueError("xi must lie in (0, 1)")
    return (np.asarray(u_relaxed) >= xi).astype(int)


def _repair_row(g, u: np.ndarray) -> np.ndarray:
    u = u.copy()
    T = u.size
    u0 = 1 if g.initial_status_on else 0
    f = _forced(g, T)
    u[f == 1] = 1
    u[f == -1] = 0
    changed = True
    while changed:
        changed = False
        prev = np.concatenate([[u0], u[:-1]])
        for t in range(T):
            if u[t] == 1 and prev[t] == 0:
                # startup: keep on for the minimum up time (clipped at the horizon)
                end = min(T, t + g.min_up)
                if not np.all(u[t:end] == 1):
                    u[t:end] = 1
                    changed = True
                    break
            if u[t] == 0 and prev[t] == 1:
                # shutdown: an off-spell shorter than min_down that ends before the horizon is cancelled
                e = t
                while e < T and u[e] == 0:
                    e += 1
                if e < T and e - t < g.min_down:
                    u[t:e] = 1
                    changed = True
                    break
    return u


def _forced(g, T: int) -> np.ndarray:
    """+1 / -1 where the initial condition fixes the unit on / off, else 0."""
    out = np.zeros(T, dtype=int)
    if g.initial_status_on:
        out[:max(0, min(T, g.min_up - g.initial_status_duration))] = 1
    else:
        out[:max(0, min(T, g.min_down - g.initial_status_duration))] = -1
    return out


def _hour_caps(gens, t: int) -> np.ndarray:
    if t > 0:
        return np.array([g.p_max for g in gens])
    # first hour is ramp-limited from the initial output
    return np.array([min(g.p_max, g.p_min + g.initial_p_above_min + g.ramp_up) if g.initial_status_on
                     else min(g.p_max, g.p_su_max) for g in gens])


def _adequacy(case: NetworkCase, gens, u: np.ndarray, u_relaxed: np.ndarray | None,
              net_import: dict | None) -> np.ndarray:
    """Commit extra units in hours where online capacity cannot cover demand.

    Checked per area (own capacity must cover demand net of ``net_import``,
    which defaults to the sum of the area's tie-line limits) and then
    system-wide.  Candidates are taken by
    descending relaxed commitment, then ascending full-load average cost,
    then id; units inside an initial forced-off window are never chosen.
    """
    u = u.copy()
    T = case.horizon
    forced = np.array([_forced(g, T) for g in gens])
    avg = np.array([(g.cost_q * g.p_max ** 2 + g.cost_l * g.p_max + g.cost_noload) / g.p_max for g in gens])
    rel = u_relaxed if u_relaxed is not None else np.zeros(u.shape)
    g_area = np.array([case.gen_area(g) for g in gens])
    b_area = np.array([b.area_id for b in case.buses])
    scopes = []
    for a in case.areas:
        if net_import is not None:
            imp = np.asarray(net_import[a.id], dtype=float)
        else:
            imp = sum(br.flow_limit for br in case.branches
                      if (case.bus_area(br.from_bus) == a.id) != (case.bus_area(br.to_bus) == a.id))
        scopes.append((g_area == a.id, case.demand[b_area == a.id].sum(axis=0) - imp))
    scopes.append((np.ones(len(gens), dtype=bool), case.demand.sum(axis=0)))
    for mask, need in scopes:
        for t in range(T):
            cap = _hour_caps(gens, t)
            short = need[t] - cap[mask] @ u[mask, t]
            if short <= 0:
                continue
            order = sorted((k for k in np.flatnonzero(mask) if u[k, t] == 0 and forced[k, t] >= 0),
                           key=lambda k: (-rel[k, t], avg[k], natural_key(gens[k].id)))
            for k in order:
                if short <= 0:
                    break
                u[k, t] = 1
                short -= cap[k]
    return u


def repair_commitment(schedule: CommitmentSchedule, case: NetworkCase,
                      u_relaxed: np.ndarray | None = None, net_import: dict | None = None) -> CommitmentSchedule:
    """Make a projected commitment satisfy min-up/min-down and initial-condition logic.

    First, hours whose online capacity cannot cover demand get extra units
    (highest relaxed commitment first): per area, demand net of
    ``net_import`` (area id -> hourly MW; by default the sum of the area's
    tie-line limits), then system-wide.  Then, per unit until nothing
    changes: honor the initial forced-on / forced-off windows; extend every
    too-short on-spell forward; hold the unit on through every too-short
    interior off-spell.  Only the initial forced-off window ever removes
    online hours, and the adequacy step never commits inside it.
    """
    by_id = {g.id: g for g in case.generators}
    gens = [by_id[gid] for gid in schedule.gen_ids]
    u = schedule.u.astype(int)
    if len(gens) == case.n_gens:
        u = _adequacy(case, gens, u, u_relaxed, net_import)
    if u.size:
        u = np.array([_repair_row(g, u[k]) for k, g in enumerate(gens)])
    return reconstruct_flags(u, case, schedule.gen_ids)


# ---------------------------------------------------------------------------
# LMPs


def _lmps_from_area_duals(case: NetworkCase, topo: ConsensusTopology, duals: dict[str, np.ndarray]):
    lmps = np.full((case.n_buses, case.horizon), np.nan)
    by_area = {}
    contrib: dict[str, list[np.ndarray]] = {}
    for v in topo.views:
        d = duals[v.area_id]
        by_area[v.area_id] = {}
        for k, bid in enumerate(v.internal_buses):
            by_area[v.area_id][bid] = d[k].copy()
            contrib.setdefault(bid, []).append(d[k])
    for bid, vals in contrib.items():
        lmps[case.bus_index[bid]] = np.mean(vals, axis=0)
    return lmps, by_area


def compute_lmps(case: NetworkCase, schedule: CommitmentSchedule, mode: str = "centralized",
                 params: AlgoParams | None = None, topo: ConsensusTopology | None = None,
                 executor=None):
    """Balance-row duals ($/MWh) per bus-hour at a fixed commitment.

    Returns ``(lmps, by_area)``; ``by_area`` maps area id to the per-bus values
    that area computed.  Only the owning area carries a balance row for a
    bus, so a shared bus's reported value is the mean over the areas that
    price it.
    """
    params = params or AlgoParams()
    if mode == "centralized":
        qp, lay = build_ed(case, None, schedule)
        sol = solve_qp(qp, tol=params.qp_tol)
        if sol.status != OPTIMAL:
            raise RuntimeError(f"centralized ED {sol.status}; no prices")
        lmps = np.zeros((case.n_buses, case.horizon))
        for k, bid in enumerate(lay.view.internal_buses):
            lmps[case.bus_index[bid]] = sol.duals_eq[lay.balance_rows[k]]
        by_area = {}
        for a in case.areas:
            by_area[a.id] = {b.id: lmps[case.bus_index[b.id]] for b in case.buses if b.area_id == a.id}
        return lmps, by_area
    if mode != "distributed":
        raise ValueError(f"unknown mode {mode!r}")
    topo = topo or ConsensusTopology(case)
    ed = run_consensus_ed(case, schedule, params, topo, eps=params.eps_lmp, max_iter=params.n_lmp,
                          executor=executor, phase="lmp")
    if not ed.converged:
        raise RuntimeError(f"distributed ED did not converge: {ed.cause}")
    return _lmps_from_area_duals(case, topo, ed.duals)


# ---------------------------------------------------------------------------
# heuristic


@dataclass
class _Candidate:
    cost: float
    breakdown: CostBreakdown
    schedule: CommitmentSchedule
    ed: EdOutcome
    restart: int
    iteration: int


def agreed_imports(case: NetworkCase, topo: ConsensusTopology, cons: ConsensusState) -> dict[str, np.ndarray]:
    """Net MW import per area and hour implied by the consensus tie flows."""
    T = case.horizon
    out = {a.id: np.zeros(T) for a in case.areas}
    br = {b.id: b for b in case.branches}
    for k, tid in enumerate(topo.tie_ids):
        f = case.base_mva * cons.F_bar[k * T:(k + 1) * T]
        b = br[tid]
        out[case.bus_area(b.from_bus)] -= f
        out[case.bus_area(b.to_bus)] += f
    return out


def _executor(threads: int):
    return ThreadPoolExecutor(max_workers=threads) if threads > 1 else nullcontext(None)


def _random_start(topo: ConsensusTopology, layouts, rng, params: AlgoParams):
    local, lam, mu = {}, {}, {}
    for a in topo.area_ids:
        lay = layouts[a]
        n_s = topo.angle_slices[a].size
        th = rng.uniform(-params.init_angle_range, params.init_angle_range, size=n_s)
        x = np.zeros(lay.n)
        x[lay.shared_index] = th
        local[a] = (th, lay.tie_flows(x))
        lam[a] = rng.uniform(-params.init_dual_range, params.init_dual_range, size=n_s)
        mu[a] = rng.uniform(-params.init_dual_range, params.init_dual_range, size=topo.flow_slices[a].size)
    # consensus averaging assumes the duals on each shared quantity sum to zero,
    # and the dual update preserves that sum, so centre the random draw
    for duals, slices, n in ((lam, topo.angle_slices, topo.n_angles), (mu, topo.flow_slices, topo.n_flows)):
        total, count = np.zeros(n), np.zeros(n)
        for a in topo.area_ids:
            np.add.at(total, slices[a], duals[a])
            np.add.at(count, slices[a], 1.0)
        mean = total / np.maximum(count, 1.0)
        for a in topo.area_ids:
            duals[a] = duals[a] - mean[slices[a]]
    return local, lam, mu


def run_multi_area_uc(case: NetworkCase, params: AlgoParams | None = None) -> ClearingResult:
    """Coordinated multi-area clearing by the restart / relaxed-ADMM / projection heuristic."""
    params = params or AlgoParams()
    t_start = time.perf_counter()
    topo = ConsensusTopology(case)
    models = {v.area_id: build_uc(case, v) for v in topo.views}
    layouts = {a: m[1] for a, m in models.items()}
    gen_ids = tuple(g.id for g in case.generators)
    gpos = {g: k for k, g in enumerate(gen_ids)}
    trace: list[dict] = []
    ed_cache: dict[bytes, EdOutcome] = {}
    best: _Candidate | None = None

    with _executor(params.threads) as ex:
        for n in range(params.n_ic):
            rng = np.random.default_rng([params.seed, n])
            if n == 0:
                state = AdmmState.zeros(topo)
                cons = ConsensusState(np.zeros(topo.n_angles), np.zeros(topo.n_flows))
            else:
                local0, lam0, mu0 = _random_start(topo, layouts, rng, params)
                state = AdmmState({}, lam0, mu0)
                cons = consensus_update(local0, topo)
            for k in range(1, params.n_uc + 1):
                def solve_area(a):
                    mi, lay = models[a]
                    tb, fb = cons.for_area(topo, a)
                    qp = build_relaxed_subproblem(mi.qp, lay, state.lam[a], state.mu[a], tb, fb, params.rho_uc)
                    return solve_qp(qp, tol=params.qp_tol, check_psd=False)

                sols = dict(zip(topo.area_ids, (ex.map(solve_area, topo.area_ids) if ex
                                                  else map(solve_area, topo.area_ids))))
                bad = [a for a, s in sols.items() if s.status != OPTIMAL]
                if bad:
                    trace.append({"phase": "uc", "restart": n, "iteration": k, "cost": np.inf, "feasible": False,
                                  "r_inf": np.nan, "s_inf": np.nan,
                                  "note": f"relaxed UC {sols[bad[0]].status} in area {bad[0]}"})
                    break
                local = {a: (layouts[a].shared_values(s.x), layouts[a].tie_flows(s.x)) for a, s in sols.items()}
                new = consensus_update(local, topo)
                res = residual(local, new, topo, cons, params.rho_uc)
                state = dual_update(state, local, new, topo, params.rho_uc)
                state.x = {a: s.x for a, s in sols.items()}
                cons = new

                u_rel = np.zeros((len(gen_ids), case.horizon))
                for a, s in sols.items():
                    lay = layouts[a]
                    for j, gid in enumerate(lay.gen_ids):
                        u_rel[gpos[gid]] = s.x[lay.u[j]]
                u_bin = project_commitment(np.clip(u_rel, 0.0, 1.0), params.xi)
                sched = repair_commitment(reconstruct_flags(u_bin, case, gen_ids), case, u_rel,
                                          agreed_imports(case, topo, cons))
                key = sched.key()
                ed = ed_cache.get(key)
                if ed is None:
                    ed = run_consensus_ed(case, sched, params, topo, executor=ex, restart=n)
                    ed_cache[key] = ed
                row = {"phase": "uc", "restart": n, "iteration": k, "r_inf": res.r_inf, "s_inf": res.s_inf,
                       "relaxed_objective": float(sum(s.objective for s in sols.values())),
                       "ed_iterations": ed.iterations}
                if ed.converged and sched.valid:
                    bd = cost_eval(case, sched, ed.p)
                    row.update(cost=bd.total, feasible=True)
                    if best is None or bd.total < best.cost:
                        best = _Candidate(bd.total, bd, sched, ed, n, k)
                else:
                    row.update(cost=np.inf, feasible=False, note=ed.cause or "invalid commitment")
                row["best_cost"] = best.cost if best else np.inf
                trace.append(row)
                log.debug("restart %d iter %d: cost %.2f best %.2f r=%.2e", n, k, row["cost"], row["best_cost"],
                         res.r_inf)

        result = ClearingResult(COORDINATED, feasible=best is not None, trace=trace)
        if best is None:
            result.message = "no projected commitment produced a converged multi-area dispatch"
            result.wall_time = time.perf_counter() - t_start
            return result
        result.schedule = best.schedule
        result.p = best.ed.p
        result.cost = best.breakdown
        result.flows = branch_flows(case, best.ed.theta)
        result.best_restart, result.best_iteration = best.restart, best.iteration
        result.converged = True
        try:
            result.lmps, result.lmp_by_area = compute_lmps(case, best.schedule, "distributed", params, topo, ex)
            result.info["lmp_source"] = "distributed"
        except RuntimeError as exc:
            log.warning("pricing pass failed (%s); using the candidate's dispatch duals", exc)
            result.lmps, result.lmp_by_area = _lmps_from_area_duals(case, topo, best.ed.duals)
            result.info["lmp_source"] = "candidate"
    feas_costs = [r["cost"] for r in trace if r.get("feasible")]
    last = max((r["iteration"] for r in trace if r.get("restart") == best.restart), default=0)
    result.info.update({
        "candidates": len(feas_costs),
        "distinct_commitments": len(ed_cache),
        "best_before_last_iteration": best.iteration < last,
    })
    result.wall_time = time.perf_counter() - t_start
    return result
