import numpy as np
import pytest
import scipy.sparse as sp
from cvxopt import matrix, solvers

from mauc.qp import INFEASIBLE, OPTIMAL, QuadraticProgram, check_kkt, solve_qp
from mauc.uc import build_ed, reconstruct_flags


def test_single_variable_with_lower_row():
    # min x^2  s.t.  x >= 1
    qp = QuadraticProgram(Q=[[2.0]], c=[0.0], A_ineq=[[-1.0]], b_ineq=[-1.0])
    sol = solve_qp(qp)
    assert sol.status == OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.duals_ineq[0] == pytest.approx(2.0, abs=1e-6)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)


def test_equality_dual_is_sensitivity():
    # min x^2 + y^2  s.t.  x + y = 2:  f*(b) = b^2 / 2, so y = b = 2
    qp = QuadraticProgram(Q=2 * np.eye(2), c=[0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0])
    sol = solve_qp(qp)
    assert np.allclose(sol.x, [1.0, 1.0], atol=1e-7)
    assert sol.duals_eq[0] == pytest.approx(2.0, abs=1e-6)


def test_bound_clipped_minimum():
    # min (x - 3)^2  s.t.  x <= 2
    qp = QuadraticProgram(Q=[[2.0]], c=[-6.0], upper=[2.0], offset=9.0)
    sol = solve_qp(qp)
    assert sol.x[0] == pytest.approx(2.0, abs=1e-7)
    assert sol.objective == pytest.approx(1.0, abs=1e-6)
    assert sol.duals_upper[0] == pytest.approx(2.0, abs=1e-6)
    assert check_kkt(qp, sol).passed


def test_kkt_detects_perturbation():
    qp = QuadraticProgram(Q=[[2.0]], c=[0.0], A_ineq=[[-1.0]], b_ineq=[-1.0])
    sol = solve_qp(qp)
    sol.x = sol.x + 1e-3
    rep = check_kkt(qp, sol)
    assert rep.stationarity == pytest.approx(2e-3, rel=1e-3)
    assert not rep.passed


def test_fixed_variable_is_honoured():
    qp = QuadraticProgram(Q=2 * np.eye(2), c=[0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0],
                          lower=[0.5, -np.inf], upper=[0.5, np.inf])
    sol = solve_qp(qp)
    assert sol.x.tolist()[0] == 0.5
    assert sol.x[1] == pytest.approx(1.5, abs=1e-7)
    assert check_kkt(qp, sol).passed


def test_infeasible_status():
    qp = QuadraticProgram(Q=[[1.0]], c=[0.0], lower=[0.0], upper=[1.0], A_eq=[[1.0]], b_eq=[3.0])
    assert solve_qp(qp).status == INFEASIBLE


@pytest.mark.parametrize("kw, msg", [
    (dict(Q=[[1.0, 0.0], [0.0, 1.0]], c=[0.0]), "Q has shape"),
    (dict(Q=[[1.0]], c=[0.0], A_eq=[[1.0, 2.0]], b_eq=[1.0]), "inconsistent"),
    (dict(Q=[[1.0]], c=[0.0], lower=[2.0], upper=[1.0]), "lower > upper"),
    (dict(Q=[[1.0, 2.0], [0.0, 1.0]], c=[0.0, 0.0]), "not symmetric"),
])
def test_malformed_programs_rejected(kw, msg):
    with pytest.raises(ValueError, match=msg):
        QuadraticProgram(**kw)


def test_indefinite_rejected():
    qp = QuadraticProgram(Q=[[1.0, 0.0], [0.0, -1.0]], c=[0.0, 0.0], lower=[-1, -1], upper=[1, 1])
    with pytest.raises(ValueError, match="positive semidefinite"):
        solve_qp(qp)


def _cvxopt_objective(Q, c, G, h, A, b):
    sol = solvers.qp(matrix(Q), matrix(c), matrix(G), matrix(h), matrix(A), matrix(b),
                     options={"show_progress": False, "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10})
    x = np.array(sol["x"]).ravel()
    return 0.5 * x @ Q @ x + c @ x


@pytest.mark.parametrize("seed", range(10))
def test_random_qps_match_reference(seed):
    rng = np.random.default_rng(seed)
    n, me, mi = 6, 2, 5
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.1 * np.eye(n)
    c = rng.normal(size=n)
    x0 = rng.normal(size=n)  # strictly feasible point
    A = rng.normal(size=(me, n))
    b = A @ x0
    G = rng.normal(size=(mi, n))
    h = G @ x0 + rng.uniform(0.1, 1.0, mi)
    qp = QuadraticProgram(Q=Q, c=c, A_eq=A, b_eq=b, A_ineq=G, b_ineq=h)
    sol = solve_qp(qp)
    assert sol.status == OPTIMAL
    assert check_kkt(qp, sol, tol=1e-6).passed
    ref = _cvxopt_objective(Q, c, G, h, A, b)
    assert sol.objective == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_demo14_single_hour_dispatch_kkt(demo14):
    u = np.ones((demo14.n_gens, demo14.horizon), dtype=int)
    sched = reconstruct_flags(u, demo14)
    qp, lay = build_ed(demo14, None, sched, hours=[11])
    sol = solve_qp(qp)
    assert sol.status == OPTIMAL
    rep = check_kkt(qp, sol)
    assert rep.passed, rep.as_dict()
    # balance duals agree with finite differences of the optimum
    k = 0
    h = 1e-3
    qp2 = QuadraticProgram(Q=qp.Q, c=qp.c, A_ineq=qp.A_ineq, b_ineq=qp.b_ineq, A_eq=qp.A_eq,
                           b_eq=qp.b_eq + h * (np.arange(qp.b_eq.size) == lay.balance_rows[k, 0]),
                           lower=qp.lower, upper=qp.upper, offset=qp.offset)
    fd = (solve_qp(qp2).objective - sol.objective) / h
    assert fd == pytest.approx(sol.duals_eq[lay.balance_rows[k, 0]], abs=1e-2)


def test_sparse_and_dense_inputs_agree():
    Q = np.diag([2.0, 4.0])
    a = solve_qp(QuadraticProgram(Q=Q, c=[-2.0, -4.0]))
    b = solve_qp(QuadraticProgram(Q=sp.csr_matrix(Q), c=[-2.0, -4.0]))
    assert np.allclose(a.x, b.x) and np.allclose(a.x, [1.0, 1.0], atol=1e-7)
