"""Unit-commitment and economic-dispatch program assembly.

Variables are laid out hour by hour; within an hour the blocks are
``u, p, v, vH, w, theta`` (UC) or ``p, theta`` (ED).  ``p`` is output above
the unit minimum, so total output is ``p_min * u + p``.  Tie-line flows used
for consensus are per unit (angle difference over reactance), angles in
radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .model import AreaView, GeneratorParams, NetworkCase, single_area_view
from .qp import QuadraticProgram

ANGLE_LIMIT = np.pi


@dataclass(frozen=True)
class AlgoParams:
    rho_uc: float = 5000.0
    rho_ed: float = 5000.0
    xi: float = 0.5
    eps_ed: float = 1e-3
    n_ic: int = 4
    n_uc: int = 10
    n_ed: int = 200
    seed: int = 0
    init_angle_range: float = 0.1
    init_dual_range: float = 10.0
    # final pricing pass on the retained commitment
    eps_lmp: float = 1e-6
    n_lmp: int = 3000
    mip_gap: float = 0.0
    node_limit: int = 200_000
    qp_tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if self.rho_uc <= 0 or self.rho_ed <= 0:
            raise ValueError("rho must be > 0")
        for name in ("n_ic", "n_uc", "n_ed", "n_lmp", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.eps_ed <= 0 or self.eps_lmp <= 0:
            raise ValueError("residual tolerances must be > 0")

    @classmethod
    def from_dict(cls, d: dict | None) -> "AlgoParams":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# commitment flags


@dataclass(frozen=True)
class CommitmentSchedule:
    gen_ids: tuple[str, ...]
    u: np.ndarray
    v: np.ndarray
    vH: np.ndarray
    w: np.ndarray
    violations: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def subset(self, gen_ids) -> "CommitmentSchedule":
        idx = [self.gen_ids.index(g) for g in gen_ids]
        return CommitmentSchedule(tuple(gen_ids), self.u[idx], self.v[idx], self.vH[idx], self.w[idx],
                                  self.violations)

    def key(self) -> bytes:
        return self.u.astype(np.int8).tobytes()


def _initial_off_hist(g: GeneratorParams) -> int | None:
    """Length of the offline spell in progress at t=0, or None if on / unknown."""
    if g.initial_status_on or g.initial_status_duration <= 0:
        return None
    return g.initial_status_duration


def hot_allowed(g: GeneratorParams, t: int, w_row: np.ndarray) -> bool:
    """Whether a startup at 0-based hour t may use the hot cost given shutdowns w_row."""
    for tau in range(max(0, t - g.cold_start_time + 1), t):
        if w_row[tau] > 0.5:
            return True
    d = _initial_off_hist(g)
    return d is not None and t + d < g.cold_start_time


def logic_violations(g: GeneratorParams, u_row: np.ndarray) -> list[str]:
    """Min-up/min-down and initial-condition violations for one unit's binary u."""
    T = u_row.size
    prev = np.concatenate([[1 if g.initial_status_on else 0], u_row[:-1]])
    v = np.maximum(u_row - prev, 0)
    w = np.maximum(prev - u_row, 0)
    out = []
    if g.initial_status_on:
        for t in range(min(T, g.min_up - g.initial_status_duration)):
            if u_row[t] != 1:
                out.append(f"{g.id}: must stay on at t={t + 1} (initial min-up)")
    else:
        for t in range(min(T, g.min_down - g.initial_status_duration)):
            if u_row[t] != 0:
                out.append(f"{g.id}: must stay off at t={t + 1} (initial min-down)")
    for t in range(T):
        if v[max(0, t - g.min_up + 1):t + 1].sum() > u_row[t]:
            out.append(f"{g.id}: min-up violated at t={t + 1}")
        if w[max(0, t - g.min_down + 1):t + 1].sum() > 1 - u_row[t]:
            out.append(f"{g.id}: min-down violated at t={t + 1}")
    return out


def reconstruct_flags(u: np.ndarray, case: NetworkCase, gen_ids=None) -> CommitmentSchedule:
    """Derive startup, hot-startup, and shutdown flags from a binary u (rows follow ``gen_ids``)."""
    gens = _gens(case, gen_ids)
    u = np.asarray(np.rint(u), dtype=int).reshape(len(gens), case.horizon)
    T = case.horizon
    v = np.zeros_like(u)
    w = np.zeros_like(u)
    vH = np.zeros_like(u)
    viol = []
    for k, g in enumerate(gens):
        prev = np.concatenate([[1 if g.initial_status_on else 0], u[k, :-1]])
        v[k] = np.maximum(u[k] - prev, 0)
        w[k] = np.maximum(prev - u[k], 0)
        for t in range(T):
            if v[k, t] and hot_allowed(g, t, w[k]):
                vH[k, t] = 1
        viol.extend(logic_violations(g, u[k]))
    return CommitmentSchedule(tuple(g.id for g in gens), u, v, vH, w, tuple(viol))


def _gens(case: NetworkCase, gen_ids) -> list[GeneratorParams]:
    if gen_ids is None:
        return list(case.generators)
    by_id = {g.id: g for g in case.generators}
    return [by_id[g] for g in gen_ids]


# ---------------------------------------------------------------------------
# cost evaluation


@dataclass(frozen=True)
class CostBreakdown:
    energy: float
    noload: float
    startup: float
    hot_startup_credit: float
    shutdown: float

    @property
    def commitment(self) -> float:
        return self.noload + self.startup + self.hot_startup_credit + self.shutdown

    @property
    def total(self) -> float:
        return self.energy + self.commitment

    def as_dict(self) -> dict:
        return {"energy": self.energy, "noload": self.noload, "startup": self.startup,
                "hot_startup_credit": self.hot_startup_credit, "shutdown": self.shutdown,
                "commitment": self.commitment, "total": self.total}


def cost_eval(case: NetworkCase, schedule: CommitmentSchedule, p: np.ndarray) -> CostBreakdown:
    """Total commitment and dispatch cost; ``p`` is output above minimum, rows as in ``schedule``."""
    gens = _gens(case, schedule.gen_ids)
    p = np.asarray(p, dtype=float).reshape(len(gens), case.horizon)
    cq = np.array([g.cost_q for g in gens])[:, None]
    cl = np.array([g.cost_l for g in gens])[:, None]
    pmin = np.array([g.p_min for g in gens])[:, None]
    P = pmin * schedule.u + p
    energy = float(np.sum(cq * P ** 2 + cl * P))
    noload = float(np.sum(np.array([g.cost_noload for g in gens])[:, None] * schedule.u))
    csu = np.array([g.cost_startup for g in gens])[:, None]
    chs = np.array([g.cost_hot_startup for g in gens])[:, None]
    startup = float(np.sum(csu * schedule.v))
    hot = float(np.sum((chs - csu) * schedule.vH))
    shutdown = float(np.sum(np.array([g.cost_shutdown for g in gens])[:, None] * schedule.w))
    return CostBreakdown(energy, noload, startup, hot, shutdown)


# ---------------------------------------------------------------------------
# layouts


@dataclass
class UcVariableLayout:
    """Index bookkeeping for one scope's UC or ED variable vector."""

    case: NetworkCase
    view: AreaView
    kind: str  # "uc" or "ed"
    gen_ids: tuple[str, ...]
    bus_ids: tuple[str, ...]
    reference: str | None
    n: int
    u: np.ndarray | None
    p: np.ndarray
    v: np.ndarray | None
    vH: np.ndarray | None
    w: np.ndarray | None
    theta: np.ndarray
    shared_buses: tuple[str, ...] = ()
    tie_ids: tuple[str, ...] = ()
    row_counts: dict = field(default_factory=dict)
    balance_rows: np.ndarray | None = None  # (n_internal, T) row index into A_eq
    _S: sp.csr_matrix | None = None
    _F: sp.csr_matrix | None = None

    @property
    def T(self) -> int:
        return self.case.horizon

    @property
    def shared_index(self) -> np.ndarray:
        """Variable indices of shared angles, ordered (bus, hour)."""
        pos = {b: k for k, b in enumerate(self.bus_ids)}
        return np.array([self.theta[pos[b], t] for b in self.shared_buses for t in range(self.T)], dtype=int)

    @property
    def S(self) -> sp.csr_matrix:
        if self._S is None:
            idx = self.shared_index
            self._S = sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, self.n))
        return self._S

    @property
    def F(self) -> sp.csr_matrix:
        """Maps the variable vector to per-unit tie-line flows, ordered (tie, hour)."""
        if self._F is None:
            case = self.case
            br = {b.id: b for b in case.branches}
            pos = {b: k for k, b in enumerate(self.bus_ids)}
            rows, cols, vals = [], [], []
            r = 0
            for tid in self.tie_ids:
                b = br[tid]
                y = 1.0 / b.reactance
                for t in range(self.T):
                    rows += [r, r]
                    cols += [self.theta[pos[b.from_bus], t], self.theta[pos[b.to_bus], t]]
                    vals += [y, -y]
                    r += 1
            self._F = sp.csr_matrix((vals, (rows, cols)), shape=(r, self.n))
        return self._F

    def shared_values(self, x: np.ndarray) -> np.ndarray:
        return x[self.shared_index]

    def tie_flows(self, x: np.ndarray) -> np.ndarray:
        return self.F @ x

    def gen_block(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[getattr(self, name)]

    def angles(self, x: np.ndarray) -> np.ndarray:
        return x[self.theta]

    def assemble(self, schedule: CommitmentSchedule, p: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Build a UC variable vector from flags, above-min output, and view angles."""
        x = np.zeros(self.n)
        sch = schedule.subset(self.gen_ids)
        if self.kind == "uc":
            x[self.u] = sch.u
            x[self.v] = sch.v
            x[self.vH] = sch.vH
            x[self.w] = sch.w
        x[self.p] = p
        x[self.theta] = theta
        return x


def _make_layout(case: NetworkCase, view: AreaView, kind: str, reference: str | None) -> UcVariableLayout:
    T = case.horizon
    G = len(view.generators)
    Nb = len(view.view_buses)
    names = ("u", "p", "v", "vH", "w") if kind == "uc" else ("p",)
    blk = len(names) * G + Nb
    idx = {}
    for k, name in enumerate(names):
        idx[name] = np.array([[t * blk + k * G + g for t in range(T)] for g in range(G)], dtype=int).reshape(G, T)
    theta = np.array([[t * blk + len(names) * G + b for t in range(T)] for b in range(Nb)],
                     dtype=int).reshape(Nb, T)
    return UcVariableLayout(
        case=case, view=view, kind=kind, gen_ids=view.generators, bus_ids=view.view_buses,
        reference=reference, n=blk * T,
        u=idx.get("u"), p=idx["p"], v=idx.get("v"), vH=idx.get("vH"), w=idx.get("w"), theta=theta,
        shared_buses=view.shared_buses, tie_ids=view.tie_lines,
    )


def _default_reference(case: NetworkCase, view: AreaView, reference):
    if reference is not None:
        return reference or None
    ref = case.reference_bus()
    return ref if ref in view.view_buses else None


def _var_names(lay: UcVariableLayout) -> list[str]:
    names = [""] * lay.n
    blocks = ["u", "p", "v", "vH", "w"] if lay.kind == "uc" else ["p"]
    for name in blocks:
        arr = getattr(lay, name)
        for g, gid in enumerate(lay.gen_ids):
            for t in range(lay.T):
                names[arr[g, t]] = f"{name}[{gid},{t + 1}]"
    for b, bid in enumerate(lay.bus_ids):
        for t in range(lay.T):
            names[lay.theta[b, t]] = f"theta[{bid},{t + 1}]"
    return names


class _Rows:
    """Accumulates sparse constraint rows."""

    def __init__(self):
        self.rows, self.cols, self.vals, self.rhs = [], [], [], []

    def add(self, coeffs: dict, rhs: float) -> int:
        r = len(self.rhs)
        for c, v in coeffs.items():
            if v != 0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(v)
        self.rhs.append(rhs)
        return r

    def matrix(self, n):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n)), np.array(self.rhs)


def _network_rows(case, view, lay, eq: _Rows, ineq: _Rows, gen_injection, demand_adj):
    """Nodal balance for internal buses and flow limits for every branch in view."""
    T = case.horizon
    base = case.base_mva
    pos = {b: k for k, b in enumerate(lay.bus_ids)}
    brs = {b.id: b for b in case.branches}
    view_branches = [brs[bid] for bid in view.branches]
    # susceptance rows restricted to the view (internal rows are complete)
    adj: dict[str, dict[str, float]] = {b: {} for b in view.internal_buses}
    for br in view_branches:
        y = 1.0 / br.reactance
        for a, c in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            if a in adj:
                adj[a][a] = adj[a].get(a, 0.0) + y
                adj[a][c] = adj[a].get(c, 0.0) - y
    gens_at: dict[str, list[int]] = {}
    by_id = {g.id: g for g in case.generators}
    for k, gid in enumerate(lay.gen_ids):
        gens_at.setdefault(by_id[gid].bus_id, []).append(k)

    lay.balance_rows = np.zeros((len(view.internal_buses), T), dtype=int)
    for i, bid in enumerate(view.internal_buses):
        d = case.demand[case.bus_index[bid]]
        for t in range(T):
            coeffs = {}
            const = 0.0
            for k in gens_at.get(bid, []):
                for col, val in gen_injection(k, t):
                    if col is None:
                        const += val
                    else:
                        coeffs[col] = coeffs.get(col, 0.0) + val
            for j, bij in adj[bid].items():
                col = lay.theta[pos[j], t]
                coeffs[col] = coeffs.get(col, 0.0) - base * bij
            rhs = d[t] - const + (demand_adj.get(bid, np.zeros(T))[t] if demand_adj else 0.0)
            lay.balance_rows[i, t] = eq.add(coeffs, rhs)
    lay.row_counts["balance"] = len(view.internal_buses) * T

    n_flow = 0
    for br in view_branches:
        y = base / br.reactance
        for t in range(T):
            cf, ct = lay.theta[pos[br.from_bus], t], lay.theta[pos[br.to_bus], t]
            ineq.add({cf: y, ct: -y}, br.flow_limit)
            ineq.add({cf: -y, ct: y}, br.flow_limit)
            n_flow += 2
    lay.row_counts["flow_limits"] = n_flow


def _angle_bounds(lay, lower, upper):
    lower[lay.theta.ravel()] = -ANGLE_LIMIT
    upper[lay.theta.ravel()] = ANGLE_LIMIT
    if lay.reference is not None:
        r = lay.bus_ids.index(lay.reference)
        lower[lay.theta[r]] = 0.0
        upper[lay.theta[r]] = 0.0


@dataclass
class MixedIntegerQp:
    qp: QuadraticProgram
    binary_indices: np.ndarray

    def __post_init__(self):
        self.binary_indices = np.asarray(self.binary_indices, dtype=int)
        if self.binary_indices.size:
            if self.binary_indices.min() < 0 or self.binary_indices.max() >= self.qp.n:
                raise ValueError("binary index out of range")
            lo = self.qp.lower[self.binary_indices]
            up = self.qp.upper[self.binary_indices]
            if np.any(lo < 0) or np.any(up > 1):
                raise ValueError("binary variables must have bounds within [0, 1]")


def build_uc(case: NetworkCase, view: AreaView | None = None, *, reference: str | None = None,
             demand_adj: dict | None = None) -> tuple[MixedIntegerQp, UcVariableLayout]:
    """Assemble the commitment program for the whole case or one area view.

    ``reference`` overrides the angle reference bus ("" for none); by default
    the case-wide reference is fixed wherever it appears in the view.
    ``demand_adj`` adds per-bus hourly withdrawals (fixed interchange).
    """
    view = view or single_area_view(case)
    lay = _make_layout(case, view, "uc", _default_reference(case, view, reference))
    T, n = case.horizon, lay.n
    gens = _gens(case, view.generators)
    eq, ineq = _Rows(), _Rows()
    Qd = np.zeros(n)
    c = np.zeros(n)
    lower = np.zeros(n)
    upper = np.ones(n)
    rc = {k: 0 for k in ("transition", "hot_window", "hot_implies_start", "min_up", "min_down", "output_limits", "ramp")}

    for k, g in enumerate(gens):
        U, P, V, VH, W = lay.u[k], lay.p[k], lay.v[k], lay.vH[k], lay.w[k]
        rng = g.p_range
        upper[P] = rng
        Qd[P] = 2 * g.cost_q
        c[P] = 2 * g.cost_q * g.p_min + g.cost_l
        c[U] = g.cost_q * g.p_min ** 2 + g.cost_l * g.p_min + g.cost_noload
        c[V] = g.cost_startup
        c[VH] = g.cost_hot_startup - g.cost_startup
        c[W] = g.cost_shutdown
        u0 = 1.0 if g.initial_status_on else 0.0
        hist = _initial_off_hist(g)
        for t in range(T):
            # transitions
            co = {U[t]: 1.0, V[t]: -1.0, W[t]: 1.0}
            if t > 0:
                co[U[t - 1]] = -1.0
            eq.add(co, u0 if t == 0 else 0.0)
            rc["transition"] += 1
            # hot start only within the cold window after a shutdown
            co = {VH[t]: 1.0}
            for tau in range(max(0, t - g.cold_start_time + 1), t):
                co[W[tau]] = -1.0
            ineq.add(co, 1.0 if hist is not None and t + hist < g.cold_start_time else 0.0)
            rc["hot_window"] += 1
            # a hot start is a start
            ineq.add({VH[t]: 1.0, V[t]: -1.0}, 0.0)
            rc["hot_implies_start"] += 1
            # min up
            co = {V[tau]: 1.0 for tau in range(max(0, t - g.min_up + 1), t + 1)}
            co[U[t]] = -1.0
            ineq.add(co, 0.0)
            rc["min_up"] += 1
            # min down
            co = {W[tau]: 1.0 for tau in range(max(0, t - g.min_down + 1), t + 1)}
            co[U[t]] = 1.0
            ineq.add(co, 1.0)
            rc["min_down"] += 1
            # output limits with startup / shutdown caps
            su = {P[t]: 1.0, U[t]: -rng, V[t]: g.p_max - g.p_su_max}
            sd = {P[t]: 1.0, U[t]: -rng}
            if t + 1 < T:
                sd[W[t + 1]] = g.p_max - g.p_sd_max
            if g.min_up == 1:
                ineq.add(su, 0.0)
                ineq.add(sd, 0.0)
                rc["output_limits"] += 2
            else:
                co = dict(su)
                if t + 1 < T:
                    co[W[t + 1]] = g.p_max - g.p_sd_max
                ineq.add(co, 0.0)
                rc["output_limits"] += 1
            # ramping on output above minimum
            if t == 0:
                p0 = g.initial_p_above_min
                ineq.add({P[0]: 1.0}, g.ramp_up + p0)
                ineq.add({P[0]: -1.0}, g.ramp_down - p0)
            else:
                ineq.add({P[t]: 1.0, P[t - 1]: -1.0}, g.ramp_up)
                ineq.add({P[t]: -1.0, P[t - 1]: 1.0}, g.ramp_down)
            rc["ramp"] += 2
        # initial-condition windows as fixed bounds
        if g.initial_status_on:
            for t in range(min(T, g.min_up - g.initial_status_duration)):
                lower[U[t]] = 1.0
        else:
            for t in range(min(T, g.min_down - g.initial_status_duration)):
                upper[U[t]] = 0.0
        # v, vH, w stay continuous in [0, 1]
    lay.row_counts.update(rc)

    pmin = {k: g.p_min for k, g in enumerate(gens)}

    def injection(k, t):
        return [(lay.u[k, t], pmin[k]), (lay.p[k, t], 1.0)]

    _network_rows(case, view, lay, eq, ineq, injection, demand_adj)
    _angle_bounds(lay, lower, upper)

    A_eq, b_eq = eq.matrix(n)
    A_in, b_in = ineq.matrix(n)
    qp = QuadraticProgram(Q=sp.diags(Qd, format="csr"), c=c, A_ineq=A_in, b_ineq=b_in, A_eq=A_eq, b_eq=b_eq,
                          lower=lower, upper=upper, names=_var_names(lay))
    return MixedIntegerQp(qp, lay.u.ravel().copy()), lay


def build_relaxed_subproblem(base: QuadraticProgram, layout: UcVariableLayout, lam, mu, theta_bar, F_bar,
                             rho: float, rho_flow: float | None = None) -> QuadraticProgram:
    """Add consensus multiplier and proximal terms on shared angles and tie flows to ``base``."""
    rho_flow = rho if rho_flow is None else rho_flow
    S, F = layout.S, layout.F
    lam, theta_bar = np.asarray(lam, float), np.asarray(theta_bar, float)
    mu, F_bar = np.asarray(mu, float), np.asarray(F_bar, float)
    if lam.size != S.shape[0] or theta_bar.size != S.shape[0]:
        raise ValueError(f"angle consensus vectors must have length {S.shape[0]}")
    if mu.size != F.shape[0] or F_bar.size != F.shape[0]:
        raise ValueError(f"flow consensus vectors must have length {F.shape[0]}")
    Q = base.Q + rho * (S.T @ S) + rho_flow * (F.T @ F)
    c = base.c + S.T @ (lam - rho * theta_bar) + F.T @ (mu - rho_flow * F_bar)
    offset = base.offset - lam @ theta_bar + 0.5 * rho * theta_bar @ theta_bar \
        - mu @ F_bar + 0.5 * rho_flow * F_bar @ F_bar
    return QuadraticProgram(Q=sp.csr_matrix(Q), c=c, A_ineq=base.A_ineq, b_ineq=base.b_ineq, A_eq=base.A_eq,
                            b_eq=base.b_eq, lower=base.lower, upper=base.upper, names=base.names,
                            offset=float(offset))


def ed_upper_caps(g: GeneratorParams, u, v, w) -> np.ndarray:
    """Upper limits on output above minimum with commitment fixed."""
    T = len(u)
    w_next = np.concatenate([np.asarray(w[1:], float), [0.0]])
    rng = g.p_range
    su = rng * u - (g.p_max - g.p_su_max) * v
    sd = rng * u - (g.p_max - g.p_sd_max) * w_next
    if g.min_up == 1:
        return np.minimum(su, sd)
    return rng * np.asarray(u, float) - (g.p_max - g.p_su_max) * np.asarray(v, float) \
        - (g.p_max - g.p_sd_max) * w_next


def build_ed(case: NetworkCase, view: AreaView | None, schedule: CommitmentSchedule, *,
             reference: str | None = None, demand_adj: dict | None = None,
             hours: list[int] | None = None) -> tuple[QuadraticProgram, UcVariableLayout]:
    """Dispatch program at a fixed commitment: variables ``p`` and ``theta`` per hour.

    ``hours`` restricts to a sub-horizon (ramping then links only consecutive
    listed hours); used for single-hour checks.
    """
    view = view or single_area_view(case)
    if hours is not None:
        case, schedule, demand_adj = _restrict_hours(case, schedule, demand_adj, hours)
    lay = _make_layout(case, view, "ed", _default_reference(case, view, reference))
    T, n = case.horizon, lay.n
    gens = _gens(case, view.generators)
    sch = schedule.subset(view.generators)
    eq, ineq = _Rows(), _Rows()
    Qd = np.zeros(n)
    c = np.zeros(n)
    lower = np.zeros(n)
    upper = np.zeros(n)
    offset = 0.0
    n_ramp = 0
    for k, g in enumerate(gens):
        P = lay.p[k]
        u = sch.u[k].astype(float)
        caps = ed_upper_caps(g, u, sch.v[k], sch.w[k])
        Qd[P] = 2 * g.cost_q
        c[P] = 2 * g.cost_q * g.p_min * u + g.cost_l
        offset += float(np.sum(g.cost_q * (g.p_min * u) ** 2 + g.cost_l * g.p_min * u))
        for t in range(T):
            if caps[t] >= 0:
                upper[P[t]] = caps[t]
            else:
                upper[P[t]] = np.inf
                ineq.add({P[t]: 1.0}, caps[t])
            if t == 0:
                p0 = g.initial_p_above_min
                ineq.add({P[0]: 1.0}, g.ramp_up + p0)
                ineq.add({P[0]: -1.0}, g.ramp_down - p0)
            else:
                ineq.add({P[t]: 1.0, P[t - 1]: -1.0}, g.ramp_up)
                ineq.add({P[t]: -1.0, P[t - 1]: 1.0}, g.ramp_down)
            n_ramp += 2
    lay.row_counts["ramp"] = n_ramp
    umat = sch.u

    def injection(k, t):
        return [(None, gens[k].p_min * umat[k, t]), (lay.p[k, t], 1.0)]

    _network_rows(case, view, lay, eq, ineq, injection, demand_adj)
    _angle_bounds(lay, lower, upper)
    A_eq, b_eq = eq.matrix(n)
    A_in, b_in = ineq.matrix(n)
    qp = QuadraticProgram(Q=sp.diags(Qd, format="csr"), c=c, A_ineq=A_in, b_ineq=b_in, A_eq=A_eq, b_eq=b_eq,
                          lower=lower, upper=upper, names=_var_names(lay), offset=offset)
    return qp, lay


def _restrict_hours(case, schedule, demand_adj, hours):
    buses = tuple(replace(b, demand=tuple(b.demand[h] for h in hours)) for b in case.buses)
    sub = replace(case, horizon=len(hours), buses=buses)
    sch = CommitmentSchedule(schedule.gen_ids, schedule.u[:, hours], schedule.v[:, hours],
                             schedule.vH[:, hours], schedule.w[:, hours], schedule.violations)
    adj = None if demand_adj is None else {b: np.asarray(a)[hours] for b, a in demand_adj.items()}
    return sub, sch, adj


def total_output(case: NetworkCase, schedule: CommitmentSchedule, p: np.ndarray) -> np.ndarray:
    pmin = np.array([g.p_min for g in _gens(case, schedule.gen_ids)])[:, None]
    return pmin * schedule.u + p
