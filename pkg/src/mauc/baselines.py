"""Comparison regimes: centralized single-area clearing and uncoordinated
per-area clearing under a fixed, price-insensitive interchange."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .coordination import SINGLE, UNCOORDINATED, ClearingResult, _executor, branch_flows, compute_lmps
from .miqp import solve_miqp
from .model import AreaView, NetworkCase, natural_key, partition_areas
from .qp import OPTIMAL, solve_qp
from .uc import AlgoParams, build_ed, build_uc, cost_eval, reconstruct_flags

log = logging.getLogger(__name__)

DEFAULT_PEAK_HOURS = tuple(range(8, 24))  # 1-based, inclusive


@dataclass(frozen=True)
class InterfaceDef:
    """Weighted aggregate of tie-lines between two areas.

    A positive weight counts the tie's from->to flow as export from
    ``areas[0]``.
    """

    name: str
    areas: tuple[str, str]
    members: tuple[tuple[str, float], ...]  # (tie-line id, weight)

    def validate(self, case: NetworkCase):
        ties = {br.id: br for br in case.branches
                if case.bus_area(br.from_bus) != case.bus_area(br.to_bus)}
        if not self.members:
            raise ValueError(f"interface {self.name!r} has no members")
        for tid, w in self.members:
            if tid not in ties:
                raise ValueError(f"interface {self.name!r}: {tid!r} is not a tie-line")
            if w == 0:
                raise ValueError(f"interface {self.name!r}: zero weight on {tid!r}")
            br = ties[tid]
            if {case.bus_area(br.from_bus), case.bus_area(br.to_bus)} != set(self.areas):
                raise ValueError(f"interface {self.name!r}: {tid!r} does not join {self.areas}")

    def to_dict(self) -> dict:
        return {"name": self.name, "areas": list(self.areas),
                "members": [{"tie_line": t, "weight": w} for t, w in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "InterfaceDef":
        return cls(d["name"], tuple(d["areas"]), tuple((m["tie_line"], float(m["weight"])) for m in d["members"]))


def default_interfaces(case: NetworkCase) -> list[InterfaceDef]:
    """One interface per adjacent area pair, unit weights signed by tie direction."""
    order = {a.id: k for k, a in enumerate(case.areas)}
    pairs: dict[tuple[str, str], list] = {}
    for br in case.branches:
        a, b = case.bus_area(br.from_bus), case.bus_area(br.to_bus)
        if a == b:
            continue
        key = tuple(sorted((a, b), key=order.__getitem__))
        pairs.setdefault(key, []).append((br.id, 1.0 if a == key[0] else -1.0))
    return [InterfaceDef(f"{a}-{b}", (a, b), tuple(m)) for (a, b), m in
            sorted(pairs.items(), key=lambda kv: (order[kv[0][0]], order[kv[0][1]]))]


@dataclass
class InterchangeSchedule:
    """Per-interface MW: ``{"constant": x}`` or ``{"peak": x, "offpeak": y, "peak_hours": [...]}``."""

    interfaces: list[InterfaceDef]
    values: dict[str, dict] = field(default_factory=dict)

    def hourly(self, name: str, horizon: int) -> np.ndarray:
        v = self.values[name]
        if "constant" in v:
            return np.full(horizon, float(v["constant"]))
        peak = np.zeros(horizon, dtype=bool)
        for h in v["peak_hours"]:
            if not 1 <= h <= horizon:
                raise ValueError(f"peak hour {h} outside 1..{horizon}")
            peak[h - 1] = True
        return np.where(peak, float(v["peak"]), float(v["offpeak"]))

    def tie_flows(self, case: NetworkCase) -> dict[str, np.ndarray]:
        """Scheduled MW on every member tie-line (from -> to), per hour."""
        out = {}
        for itf in self.interfaces:
            itf.validate(case)
            total = self.hourly(itf.name, case.horizon)
            norm = sum(w * w for _, w in itf.members)
            for tid, w in itf.members:
                out[tid] = out.get(tid, 0.0) + total * w / norm
        return out

    def to_dict(self) -> dict:
        return {"interfaces": [i.to_dict() for i in self.interfaces],
                "interchange": {k: dict(v) for k, v in self.values.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "InterchangeSchedule":
        itfs = [InterfaceDef.from_dict(x) for x in d["interfaces"]]
        vals = {k: dict(v) for k, v in d["interchange"].items()}
        missing = [i.name for i in itfs if i.name not in vals]
        if missing:
            raise ValueError(f"no interchange value for interface {missing[0]!r}")
        return cls(itfs, vals)


# ---------------------------------------------------------------------------


def run_single_area(case: NetworkCase, params: AlgoParams | None = None) -> ClearingResult:
    """Whole system cleared as one area by exact branch and bound."""
    params = params or AlgoParams()
    t0 = time.perf_counter()
    mi, lay = build_uc(case)
    sol = solve_miqp(mi, rel_gap=params.mip_gap, node_limit=params.node_limit, tol=params.qp_tol)
    trace = [{"phase": "bnb", "restart": 0, "iteration": k + 1, "cost": c, "feasible": True}
             for k, c in enumerate(sol.incumbent_history)]
    res = ClearingResult(SINGLE, feasible=sol.x is not None, trace=trace)
    res.info.update({"miqp_status": sol.status, "nodes": sol.nodes_explored, "proven_gap": sol.proven_gap,
                     "objective": sol.objective})
    if sol.x is None:
        res.message = f"single-area MIQP {sol.status}"
        res.wall_time = time.perf_counter() - t0
        return res
    u = np.rint(sol.x[lay.u]).astype(int)
    res.schedule = reconstruct_flags(u, case, lay.gen_ids)
    res.p = np.maximum(sol.x[lay.p], 0.0)
    theta = np.zeros((case.n_buses, case.horizon))
    for k, bid in enumerate(lay.bus_ids):
        theta[case.bus_index[bid]] = sol.x[lay.theta[k]]
    res.flows = branch_flows(case, theta)
    res.cost = cost_eval(case, res.schedule, res.p)
    res.converged = sol.status == OPTIMAL
    res.lmps, res.lmp_by_area = compute_lmps(case, res.schedule, "centralized", params)
    res.wall_time = time.perf_counter() - t0
    return res


def derive_interchange(single: ClearingResult, case: NetworkCase, interfaces: list[InterfaceDef] | None = None,
                       mode: str = "peak_offpeak", peak_hours=DEFAULT_PEAK_HOURS) -> InterchangeSchedule:
    """Interchange fixed at the mean weighted interface flow of a single-area result."""
    if not single.feasible or single.flows is None:
        raise ValueError("interchange needs a feasible single-area result")
    interfaces = interfaces if interfaces is not None else default_interfaces(case)
    T = case.horizon
    peak = sorted({int(h) for h in peak_hours if 1 <= int(h) <= T})
    pos = {br.id: k for k, br in enumerate(case.branches)}
    vals = {}
    for itf in interfaces:
        itf.validate(case)
        flow = sum(w * single.flows[pos[tid]] for tid, w in itf.members)
        if mode == "constant":
            vals[itf.name] = {"constant": float(np.mean(flow))}
        elif mode == "peak_offpeak":
            mask = np.zeros(T, dtype=bool)
            mask[[h - 1 for h in peak]] = True
            vals[itf.name] = {
                "peak": float(np.mean(flow[mask])) if mask.any() else float(np.mean(flow)),
                "offpeak": float(np.mean(flow[~mask])) if (~mask).any() else float(np.mean(flow)),
                "peak_hours": peak,
            }
        else:
            raise ValueError(f"unknown interchange mode {mode!r}")
    return InterchangeSchedule(list(interfaces), vals)


def isolated_view(case: NetworkCase, view: AreaView) -> AreaView:
    """The area with its tie-lines and external buses removed."""
    return AreaView(view.area_id, view.internal_buses, (), (), view.internal_branches, view.generators, ())


def _area_adjustments(case: NetworkCase, tie_mw: dict[str, np.ndarray]) -> dict[str, dict]:
    """Fixed withdrawals per area and bus realizing the scheduled tie flows."""
    adj: dict[str, dict] = {a.id: {} for a in case.areas}
    br = {b.id: b for b in case.branches}
    for tid in sorted(tie_mw, key=natural_key):
        f = tie_mw[tid]
        b = br[tid]
        fa, ta = case.bus_area(b.from_bus), case.bus_area(b.to_bus)
        adj[fa][b.from_bus] = adj[fa].get(b.from_bus, 0.0) + f
        adj[ta][b.to_bus] = adj[ta].get(b.to_bus, 0.0) - f
    return adj


def run_uncoordinated(case: NetworkCase, schedule: InterchangeSchedule,
                      params: AlgoParams | None = None) -> ClearingResult:
    """Each area cleared alone with the interchange as fixed boundary injections."""
    params = params or AlgoParams()
    t0 = time.perf_counter()
    tie_mw = schedule.tie_flows(case)
    adj = _area_adjustments(case, tie_mw)
    views = [isolated_view(case, v) for v in partition_areas(case)]
    res = ClearingResult(UNCOORDINATED, feasible=True)
    res.info["tie_schedule"] = {k: v.tolist() for k, v in tie_mw.items()}
    pos = {br.id: k for k, br in enumerate(case.branches)}
    for tid, f in tie_mw.items():
        lim = case.branches[pos[tid]].flow_limit
        if np.any(np.abs(f) > lim + 1e-9):
            res.feasible = False
            res.message = f"scheduled flow on tie-line {tid} exceeds its limit"
            res.wall_time = time.perf_counter() - t0
            return res

    def solve_area(view):
        ref = min(view.internal_buses, key=natural_key)
        mi, lay = build_uc(case, view, reference=ref, demand_adj=adj[view.area_id])
        return view, ref, lay, solve_miqp(mi, rel_gap=params.mip_gap, node_limit=params.node_limit,
                                          tol=params.qp_tol)

    with _executor(params.threads) as ex:
        outs = list(ex.map(solve_area, views)) if ex else [solve_area(v) for v in views]

    G, T = case.n_gens, case.horizon
    gpos = {g.id: k for k, g in enumerate(case.generators)}
    u = np.zeros((G, T), dtype=int)
    p = np.zeros((G, T))
    theta = np.zeros((case.n_buses, T))
    lmps = np.full((case.n_buses, T), np.nan)
    for view, ref, lay, sol in outs:
        a = view.area_id
        res.trace += [{"phase": f"bnb:{a}", "restart": 0, "iteration": k + 1, "cost": c, "feasible": True}
                      for k, c in enumerate(sol.incumbent_history)]
        res.info[f"nodes:{a}"] = sol.nodes_explored
        if sol.x is None:
            res.feasible = False
            res.message = f"area {a} infeasible under the fixed interchange ({sol.status})"
            res.info["infeasible_area"] = a
            res.wall_time = time.perf_counter() - t0
            return res
        for j, gid in enumerate(lay.gen_ids):
            u[gpos[gid]] = np.rint(sol.x[lay.u[j]])
            p[gpos[gid]] = np.maximum(sol.x[lay.p[j]], 0.0)
        for k, bid in enumerate(lay.bus_ids):
            theta[case.bus_index[bid]] = sol.x[lay.theta[k]]
        # per-area prices at the area's own commitment
        sched_a = reconstruct_flags(np.rint(sol.x[lay.u]).astype(int), case, lay.gen_ids)
        qp, elay = build_ed(case, view, sched_a, reference=ref, demand_adj=adj[a])
        ed = solve_qp(qp, tol=params.qp_tol)
        if ed.status != OPTIMAL:
            raise RuntimeError(f"area {a}: dispatch at the optimal commitment is {ed.status}")
        res.lmp_by_area[a] = {}
        for k, bid in enumerate(view.internal_buses):
            val = ed.duals_eq[elay.balance_rows[k]]
            lmps[case.bus_index[bid]] = val
            res.lmp_by_area[a][bid] = val.copy()
    res.schedule = reconstruct_flags(u, case)
    res.p = p
    flows = branch_flows(case, theta)
    for tid, f in tie_mw.items():
        flows[pos[tid]] = f  # ties carry the schedule, not an angle difference
    res.flows = flows
    res.lmps = lmps
    res.cost = cost_eval(case, res.schedule, p)
    res.converged = True
    res.wall_time = time.perf_counter() - t0
    return res


def schedule_from_dict(d: dict | None, case: NetworkCase) -> InterchangeSchedule | None:
    if d is None:
        return None
    sched = InterchangeSchedule.from_dict(d)
    for itf in sched.interfaces:
        itf.validate(case)
    return sched


