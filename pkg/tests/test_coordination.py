import numpy as np
import pytest

from mauc.baselines import run_single_area
from mauc.coordination import (branch_flows, compute_lmps, project_commitment, repair_commitment,
                               run_multi_area_uc)
from mauc.uc import AlgoParams, reconstruct_flags
from support import gen, logic_ok, make_case


def test_projection_threshold():
    assert project_commitment(np.array([0.49, 0.5, 0.51, 0.0, 1.0]), 0.5).tolist() == [0, 1, 1, 0, 1]
    assert project_commitment(np.array([0.2, 0.3]), 0.25).tolist() == [0, 1]
    with pytest.raises(ValueError):
        project_commitment(np.zeros(2), 1.0)


def idle_unit(T, **kw):
    return make_case({"b": ("A", [0.0] * T)}, [gen("G", "b", **kw)])


def repaired(case, u):
    s = reconstruct_flags(np.array([u]), case)
    return repair_commitment(s, case).u[0].tolist()


def test_repair_extends_short_on_spell():
    case = idle_unit(5, min_up=3, initial_status_on=False, initial_status_duration=5)
    assert repaired(case, [0, 1, 0, 0, 0]) == [0, 1, 1, 1, 0]


def test_repair_clips_min_up_at_horizon():
    case = idle_unit(4, min_up=3, initial_status_on=False, initial_status_duration=5)
    assert repaired(case, [0, 0, 0, 1]) == [0, 0, 0, 1]


def test_repair_cancels_short_off_spell():
    case = idle_unit(5, min_down=3, initial_status_on=True, initial_status_duration=5)
    assert repaired(case, [1, 0, 1, 1, 1]) == [1, 1, 1, 1, 1]


def test_repair_keeps_off_spell_running_to_horizon():
    case = idle_unit(4, min_down=3, initial_status_on=True, initial_status_duration=5)
    assert repaired(case, [1, 1, 0, 0]) == [1, 1, 0, 0]


def test_repair_honours_initial_windows():
    on = idle_unit(4, min_up=3, initial_status_on=True, initial_status_duration=1)
    assert repaired(on, [0, 0, 0, 0]) == [1, 1, 0, 0]
    off = idle_unit(4, min_down=3, initial_status_on=False, initial_status_duration=1)
    assert repaired(off, [1, 1, 1, 1]) == [0, 0, 1, 1]


def test_repair_adds_capacity_for_unserved_hours():
    case = make_case({"b": ("A", [50.0, 150.0])},
                     [gen("G1", "b", p_max=100.0), gen("G2", "b", p_max=100.0, initial_status_on=False)])
    s = repair_commitment(reconstruct_flags(np.array([[1, 1], [0, 0]]), case), case)
    assert s.u.tolist() == [[1, 1], [0, 1]]


@pytest.mark.parametrize("seed", range(3))
def test_repair_output_is_always_valid(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        kw = dict(min_up=int(rng.integers(1, 5)), min_down=int(rng.integers(1, 5)),
                  initial_status_on=bool(rng.random() < 0.5), initial_status_duration=int(rng.integers(0, 5)))
        case = idle_unit(8, **kw)
        out = repaired(case, rng.integers(0, 2, size=8).tolist())
        assert logic_ok(case.generators[0], out)
        assert reconstruct_flags(np.array([out]), case).valid


# -- prices --------------------------------------------------------------------


def test_single_bus_price():
    case = make_case({"b": ("A", [40.0])}, [gen("G", "b", p_min=0.0, cost_l=25.0)])
    lmps, by_area = compute_lmps(case, reconstruct_flags(np.ones((1, 1), int), case))
    assert lmps[0, 0] == pytest.approx(25.0, abs=1e-4)
    assert by_area["A"]["b"][0] == pytest.approx(25.0, abs=1e-4)


def two_bus(limit, areas=("A", "A")):
    return make_case({"b1": (areas[0], [20.0, 20.0]), "b2": (areas[1], [100.0, 40.0])},
                     [gen("G1", "b1", p_min=0.0, p_max=200.0, cost_q=0.05, cost_l=10.0),
                      gen("G2", "b2", p_min=0.0, p_max=200.0, cost_q=0.1, cost_l=30.0)],
                     [("t", "b1", "b2", 0.1, limit)])


@pytest.mark.parametrize("areas", [("A", "A"), ("A", "B")])
def test_congested_two_bus_matches_hand_kkt(areas):
    case = two_bus(50.0, areas)
    s = reconstruct_flags(np.ones((2, 2), int), case)
    lmps, _ = compute_lmps(case, s)
    # hour 1: tie at its 50 MW limit -> P1 = 70, P2 = 50
    assert lmps[0, 0] == pytest.approx(10 + 2 * 0.05 * 70, abs=1e-4)
    assert lmps[1, 0] == pytest.approx(30 + 2 * 0.1 * 50, abs=1e-4)
    # hour 2: unconstrained, G1 serves all 60 MW (marginal cost 16 < 30)
    assert lmps[:, 1] == pytest.approx([16.0, 16.0], abs=1e-4)


def test_distributed_prices_match_centralized():
    case = two_bus(50.0, ("A", "B"))
    s = reconstruct_flags(np.ones((2, 2), int), case)
    central, _ = compute_lmps(case, s)
    dist, by_area = compute_lmps(case, s, "distributed", AlgoParams())
    assert np.allclose(dist, central, atol=1e-3)
    assert set(by_area) == {"A", "B"}


def test_uncongested_prices_are_flat(demo14):
    single = run_single_area(demo14)
    flows = single.flows
    limits = np.array([br.flow_limit for br in demo14.branches])[:, None]
    for t in range(demo14.horizon):
        if np.all(np.abs(flows[:, t]) < limits[:, 0] - 1e-3):
            assert np.ptp(single.lmps[:, t]) < 1e-4


def test_unknown_price_mode():
    case = two_bus(50.0)
    with pytest.raises(ValueError):
        compute_lmps(case, reconstruct_flags(np.ones((2, 2), int), case), "nodal")


# -- heuristic -----------------------------------------------------------------


@pytest.fixture(scope="module")
def micro2_runs(micro2):
    return run_single_area(micro2), run_multi_area_uc(micro2, AlgoParams(seed=42))


def test_coordinated_result_invariants(micro2, micro2_runs):
    single, coord = micro2_runs
    assert coord.feasible and coord.schedule.valid
    assert coord.cost_total >= single.cost_total - 1e-6
    P = coord.output(micro2)
    assert np.allclose(P.sum(axis=0), micro2.demand.sum(axis=0), atol=1e-6)
    limits = np.array([br.flow_limit for br in micro2.branches])[:, None]
    assert np.all(np.abs(coord.flows) <= limits + 1e-6)
    assert np.isfinite(coord.lmps).all()


def test_best_candidate_is_retained(micro2_runs):
    _, coord = micro2_runs
    costs = [r["cost"] for r in coord.trace if r.get("feasible")]
    assert coord.cost_total == min(costs)
    best = [r for r in coord.trace if r["restart"] == coord.best_restart and r["iteration"] == coord.best_iteration]
    assert best and best[0]["cost"] == coord.cost_total
    # running best never increases along the trace
    running = [r["best_cost"] for r in coord.trace if "best_cost" in r]
    assert all(b <= a for a, b in zip(running, running[1:]))


def test_trace_bounded_by_iteration_limits(micro2):
    p = AlgoParams(n_ic=2, n_uc=3)
    coord = run_multi_area_uc(micro2, p)
    assert len(coord.trace) <= p.n_ic * p.n_uc


def test_single_area_case_runs():
    case = make_case({"b1": ("A", [40.0, 80.0]), "b2": ("A", [30.0, 30.0])},
                     [gen("G1", "b1", p_max=150.0, cost_l=15.0), gen("G2", "b2", cost_l=25.0, initial_status_on=False)],
                     [("l", "b1", "b2", 0.1, 100.0)])
    coord = run_multi_area_uc(case, AlgoParams(n_ic=1, n_uc=2))
    assert coord.feasible
    assert coord.cost_total >= run_single_area(case).cost_total - 1e-6


def test_branch_flows_from_angles(micro2):
    theta = np.array([[0.0] * 4, [-0.1] * 4])
    assert np.allclose(branch_flows(micro2, theta), 100.0)


def test_random_restart_duals_sum_to_zero(demo3area):
    from mauc.admm import ConsensusTopology
    from mauc.coordination import _random_start
    from mauc.uc import build_uc
    topo = ConsensusTopology(demo3area)
    layouts = {v.area_id: build_uc(demo3area, v)[1] for v in topo.views}
    _, lam, mu = _random_start(topo, layouts, np.random.default_rng(1), AlgoParams())
    for duals, slices, n in ((lam, topo.angle_slices, topo.n_angles), (mu, topo.flow_slices, topo.n_flows)):
        total = np.zeros(n)
        for a in topo.area_ids:
            np.add.at(total, slices[a], duals[a])
        assert np.allclose(total, 0.0, atol=1e-12)
        assert max(np.abs(duals[a]).max() for a in topo.area_ids) > 1.0
