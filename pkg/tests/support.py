"""Case builders and independent reference implementations for the tests.

Nothing here calls into the package's program builders: the dispatch oracle
writes its own DC-network QP directly from the case data and solves it with
cvxopt, and the commitment logic is checked by run lengths rather than by the
window inequalities the package uses.
"""

from __future__ import annotations

import itertools

import numpy as np
from cvxopt import matrix, solvers
from scipy.optimize import linprog

from mauc.model import case_from_dict

solvers.options.update({"show_progress": False, "abstol": 1e-8, "reltol": 1e-10, "feastol": 1e-9,
                        "maxiters": 300})


def _converged(sol, gap_tol=1e-7) -> bool:
    # cvxopt sometimes stops with "unknown" at a point that is optimal to working precision
    if sol["status"] == "optimal":
        return True
    gap = sol["relative gap"]
    return (sol["status"] == "unknown" and sol["primal infeasibility"] < 1e-8
            and sol["dual infeasibility"] < 1e-8 and gap is not None and gap < gap_tol)


# ---------------------------------------------------------------------------
# builders


def gen(id, bus, **kw):
    d = dict(id=id, bus_id=bus, p_min=10.0, p_max=100.0, ramp_up=100.0,
             ramp_down=100.0, min_up=1, min_down=1, cold_start_time=1, cost_q=0.0, cost_l=10.0,
             cost_noload=0.0, cost_startup=0.0, cost_hot_startup=0.0, cost_shutdown=0.0,
             initial_status_on=True, initial_status_duration=1)
    d.update(kw)
    d.setdefault("p_su_max", d["p_max"])
    d.setdefault("p_sd_max", d["p_max"])
    return d


def case_dict(demand: dict, gens: list, branches=(), areas=None, base_mva=100.0, name="test"):
    """``demand`` maps bus id -> (area id, hourly list)."""
    T = len(next(iter(demand.values()))[1])
    area_ids = areas or sorted({a for a, _ in demand.values()})
    return {
        "name": name, "horizon": T, "base_mva": base_mva,
        "areas": [{"id": a} for a in area_ids],
        "buses": [{"id": b, "area_id": a, "demand": list(map(float, d))} for b, (a, d) in demand.items()],
        "branches": [{"id": i, "from_bus": f, "to_bus": t, "reactance": x, "flow_limit": lim}
                     for i, f, t, x, lim in branches],
        "generators": list(gens),
    }


def make_case(*args, **kw):
    return case_from_dict(case_dict(*args, **kw))


def random_uc_case(rng: np.random.Generator, max_binaries: int = 12):
    """Small random UC instance: 1-3 buses, 2-3 units, 2-4 hours."""
    while True:
        G = int(rng.integers(2, 4))
        T = int(rng.integers(2, 5))
        if G * T <= max_binaries:
            break
    nb = int(rng.integers(1, 4))
    buses = [f"b{k + 1}" for k in range(nb)]
    gens = []
    for k in range(G):
        pmin = float(rng.integers(0, 4) * 10)
        pmax = pmin + float(rng.integers(4, 12) * 10)
        on = bool(rng.random() < 0.5)
        gens.append(gen(
            f"g{k + 1}", buses[int(rng.integers(nb))], p_min=pmin, p_max=pmax,
            p_su_max=float(rng.uniform(pmin, pmax)), p_sd_max=float(rng.uniform(pmin, pmax)),
            ramp_up=float(rng.integers(3, 10) * 10), ramp_down=float(rng.integers(3, 10) * 10),
            min_up=int(rng.integers(1, 4)), min_down=int(rng.integers(1, 4)),
            cold_start_time=int(rng.integers(1, 4)),
            cost_q=float(rng.choice([0.0, rng.uniform(0.005, 0.08)])), cost_l=float(rng.uniform(8, 40)),
            cost_noload=float(rng.uniform(0, 200)), cost_startup=(su := float(rng.uniform(50, 600))),
            cost_hot_startup=float(rng.uniform(0, su)), cost_shutdown=float(rng.uniform(0, 80)),
            initial_status_on=on, initial_status_duration=int(rng.integers(1, 4)),
            initial_output=float(rng.uniform(pmin, pmax)) if on else None))
    cap = sum(g["p_max"] for g in gens)
    total = rng.uniform(0.2, 0.7, size=T) * cap
    share = rng.dirichlet(np.ones(nb))
    demand = {b: ("A", list(np.round(total * share[i], 3))) for i, b in enumerate(buses)}
    branches = [(f"l{i}", buses[i - 1], buses[i], float(rng.uniform(0.05, 0.3)), float(rng.uniform(30, 150)))
                for i in range(1, nb)]
    return make_case(demand, gens, branches)


# ---------------------------------------------------------------------------
# commitment logic by run lengths


def spells(g, u):
    """(state, length, started_before_horizon, runs_to_end) for each constant run of ``u``."""
    out = []
    state = 1 if g.initial_status_on else 0
    length, before = g.initial_status_duration, True
    for x in u:
        if x == state:
            length += 1
        else:
            out.append((state, length, before, False))
            state, length, before = int(x), 1, False
    out.append((state, length, before, True))
    return out


def logic_ok(g, u) -> bool:
    """Min-up / min-down including the spell in progress at the start of the horizon.

    Every spell that ends inside the horizon must have lasted its minimum;
    a spell still running at the end is exempt.
    """
    for state, length, _, to_end in spells(g, u):
        if not to_end and length < (g.min_up if state else g.min_down):
            return False
    return True


def flags_from_u(g, u):
    """(v, vH, w) with a startup hot iff the preceding off-spell is shorter than the cold time."""
    T = len(u)
    v = np.zeros(T, int)
    w = np.zeros(T, int)
    vh = np.zeros(T, int)
    prev = 1 if g.initial_status_on else 0
    off_len = None if g.initial_status_on or g.initial_status_duration <= 0 else g.initial_status_duration
    for t in range(T):
        if u[t] == 1 and prev == 0:
            v[t] = 1
            vh[t] = int(off_len is not None and off_len < g.cold_start_time)
        if u[t] == 0 and prev == 1:
            w[t] = 1
            off_len = 0
        if u[t] == 0:
            off_len = None if off_len is None else off_len + 1
        prev = u[t]
    return v, vh, w


def commitment_cost(g, u, v, vh, w) -> float:
    return float(g.cost_noload * np.sum(u) + g.cost_startup * np.sum(v)
                 + (g.cost_hot_startup - g.cost_startup) * np.sum(vh) + g.cost_shutdown * np.sum(w))


# ---------------------------------------------------------------------------
# dispatch oracle


def _upper_above_min(g, u, v, w):
    T = len(u)
    rng = g.p_max - g.p_min
    out = np.zeros(T)
    for t in range(T):
        wn = w[t + 1] if t + 1 < T else 0
        su = rng * u[t] - (g.p_max - g.p_su_max) * v[t]
        sd = rng * u[t] - (g.p_max - g.p_sd_max) * wn
        out[t] = min(su, sd) if g.min_up == 1 else rng * u[t] - (g.p_max - g.p_su_max) * v[t] \
            - (g.p_max - g.p_sd_max) * wn
    return out


def dispatch_oracle(case, u, flags=None, gap_tol=1e-7):
    """Optimal DC dispatch at commitment ``u`` (G, T), solved with cvxopt.

    Returns ``(energy_cost, P, theta, balance_duals)`` with ``P`` total MW,
    or None if infeasible.  Duals are d(cost)/d(demand) per bus-hour.
    ``gap_tol`` is the relative duality gap accepted when cvxopt stops short
    of "optimal"; large cases need a looser value than the default.
    """
    G, T, N = case.n_gens, case.horizon, case.n_buses
    u = np.asarray(u, int).reshape(G, T)
    flags = flags or [flags_from_u(g, u[k]) for k, g in enumerate(case.generators)]
    nP, n = G * T, G * T + N * T
    iP = lambda k, t: k * T + t  # noqa: E731
    ith = lambda b, t: nP + b * T + t  # noqa: E731
    Pm = np.zeros((n, n))
    q = np.zeros(n)
    Gr, h = [], []
    Ar, bv = [], []

    def row(d):
        r = np.zeros(n)
        for k, val in d.items():
            r[k] += val
        return r

    for k, g in enumerate(case.generators):
        v, _, w = flags[k]
        ub = _upper_above_min(g, u[k], v, w)
        p0 = max(0.0, (g.initial_output or 0.0) - g.p_min) if g.initial_status_on and g.initial_output else 0.0
        for t in range(T):
            j = iP(k, t)
            Pm[j, j] = 2 * g.cost_q
            q[j] = g.cost_l
            lo = g.p_min * u[k, t]
            Gr.append(row({j: -1.0})); h.append(-lo)
            Gr.append(row({j: 1.0})); h.append(lo + ub[t])
            # ramp on output above minimum
            cur = {j: 1.0}
            if t == 0:
                Gr.append(row(cur)); h.append(g.ramp_up + p0 + lo)
                Gr.append(row({j: -1.0})); h.append(g.ramp_down - p0 - lo)
            else:
                jp = iP(k, t - 1)
                lo_p = g.p_min * u[k, t - 1]
                Gr.append(row({j: 1.0, jp: -1.0})); h.append(g.ramp_up + lo - lo_p)
                Gr.append(row({j: -1.0, jp: 1.0})); h.append(g.ramp_down - lo + lo_p)
    bi = case.bus_index
    for t in range(T):
        for b in case.buses:
            d = {iP(k, t): 1.0 for k, g in enumerate(case.generators) if g.bus_id == b.id}
            for br in case.branches:
                y = case.base_mva / br.reactance
                if br.from_bus == b.id:
                    d[ith(bi[br.from_bus], t)] = d.get(ith(bi[br.from_bus], t), 0.0) - y
                    d[ith(bi[br.to_bus], t)] = d.get(ith(bi[br.to_bus], t), 0.0) + y
                elif br.to_bus == b.id:
                    d[ith(bi[br.to_bus], t)] = d.get(ith(bi[br.to_bus], t), 0.0) - y
                    d[ith(bi[br.from_bus], t)] = d.get(ith(bi[br.from_bus], t), 0.0) + y
            Ar.append(row(d)); bv.append(b.demand[t])
        for br in case.branches:
            y = case.base_mva / br.reactance
            i, j = ith(bi[br.from_bus], t), ith(bi[br.to_bus], t)
            Gr.append(row({i: y, j: -y})); h.append(br.flow_limit)
            Gr.append(row({i: -y, j: y})); h.append(br.flow_limit)
        for b in range(N):
            Gr.append(row({ith(b, t): 1.0})); h.append(np.pi)
            Gr.append(row({ith(b, t): -1.0})); h.append(np.pi)
        Ar.append(row({ith(0, t): 1.0})); bv.append(0.0)  # bus order is irrelevant for the reference
    # quick capacity screen avoids solving hopeless patterns
    for t in range(T):
        cap = sum(u[k, t] * g.p_min + _upper_above_min(g, u[k], *flags[k][::2])[t]
                  for k, g in enumerate(case.generators))
        if cap < case.demand[:, t].sum() - 1e-9:
            return None
    Gr, h, Ar, bv = np.array(Gr), np.array(h, float), np.array(Ar), np.array(bv, float)
    # cvxopt can raise on infeasible problems, so screen with an LP first
    if linprog(np.zeros(n), A_ub=Gr, b_ub=h, A_eq=Ar, b_eq=bv, bounds=(None, None)).status == 2:
        return None
    sol = solvers.qp(matrix(Pm), matrix(q), matrix(Gr), matrix(h), matrix(Ar), matrix(bv))
    if not _converged(sol, gap_tol):
        return None
    x = np.array(sol["x"]).ravel()
    P = x[:nP].reshape(G, T)
    theta = x[nP:].reshape(N, T)
    cost = float(sum(g.cost_q * P[k] @ P[k] + g.cost_l * P[k].sum() for k, g in enumerate(case.generators)))
    # cvxopt: L = f + y'(Ax - b); d f*/d b = -y, balance rows come first in each hour block
    y = np.array(sol["y"]).ravel()
    per_t = N + 1
    duals = np.array([[-y[t * per_t + b] for t in range(T)] for b in range(N)])
    return cost, P, theta, duals


def enumerate_uc(case):
    """Exhaustive minimum over all logic-feasible binary commitments.

    Returns ``(objective, u)`` or ``(inf, None)``.
    """
    G, T = case.n_gens, case.horizon
    rows = []
    for g in case.generators:
        ok = [np.array(r) for r in itertools.product((0, 1), repeat=T) if logic_ok(g, r)]
        rows.append([(r, flags_from_u(g, r)) for r in ok])
    best, best_u = np.inf, None
    for combo in itertools.product(*rows):
        u = np.array([r for r, _ in combo])
        flags = [f for _, f in combo]
        cc = sum(commitment_cost(g, u[k], *flags[k]) for k, g in enumerate(case.generators))
        if cc >= best:
            continue
        out = dispatch_oracle(case, u, flags)
        if out is None:
            continue
        if cc + out[0] < best:
            best, best_u = cc + out[0], u
    return best, best_u
