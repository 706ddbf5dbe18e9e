"""Convex QP container, interior-point solve, and KKT residual checks.

Sign conventions for multipliers (all reported in the caller's units):

    Q x + c - A_eq^T y + A_ineq^T z - z_lo + z_up = 0,   z, z_lo, z_up >= 0

so ``y`` is the sensitivity of the optimum to ``b_eq`` (a balance-row dual
is the marginal cost of one more unit of demand).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import clarabel
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

DEFAULT_TOL = 1e-8
TOL_PSD = 1e-9


def _csr(m, shape):
    if m is None:
        return sp.csr_matrix(shape)
    return sp.csr_matrix(m, dtype=float)


@dataclass
class QuadraticProgram:
    """minimize 0.5 x'Qx + c'x + offset  s.t.  A_ineq x <= b_ineq, A_eq x = b_eq, lower <= x <= upper."""

    Q: sp.spmatrix
    c: np.ndarray
    A_ineq: sp.spmatrix | None = None
    b_ineq: np.ndarray | None = None
    A_eq: sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    names: list[str] | None = None
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.Q = _csr(self.Q, (n, n))
        self.A_ineq = _csr(self.A_ineq, (0, n))
        self.A_eq = _csr(self.A_eq, (0, n))
        self.b_ineq = np.zeros(0) if self.b_ineq is None else np.asarray(self.b_ineq, dtype=float).ravel()
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).copy()
        self.validate()

    @property
    def n(self) -> int:
        return self.c.size

    def validate(self):
        n = self.n
        if self.Q.shape != (n, n):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(n, n)}")
        for A, b, name in ((self.A_ineq, self.b_ineq, "ineq"), (self.A_eq, self.b_eq, "eq")):
            if A.shape[1] != n or A.shape[0] != b.size:
                raise ValueError(f"A_{name} {A.shape} inconsistent with b_{name} ({b.size}) and n={n}")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must have length n")
        if np.any(self.lower > self.upper):
            k = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower > upper for variable {self.name(k)}")
        asym = abs(self.Q - self.Q.T)
        if asym.nnz and asym.max() > 1e-12 * max(1.0, abs(self.Q).max()):
            raise ValueError("Q is not symmetric")

    def check_psd(self, tol: float = TOL_PSD):
        Q = self.Q
        off = Q - sp.diags(Q.diagonal())
        if off.count_nonzero() == 0:
            lam_min = Q.diagonal().min(initial=0.0)
        else:
            lam_min = np.linalg.eigvalsh(Q.toarray()).min()
        if lam_min < -tol:
            raise ValueError(f"Q is not positive semidefinite (min eigenvalue {lam_min:.3e})")

    def name(self, k: int) -> str:
        return self.names[k] if self.names else f"x[{k}]"

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.Q @ x) + self.c @ x + self.offset)

    def with_bounds(self, lower=None, upper=None) -> "QuadraticProgram":
        return replace(self,
                       lower=self.lower if lower is None else lower,
                       upper=self.upper if upper is None else upper)


@dataclass
class QpSolution:
    x: np.ndarray
    duals_eq: np.ndarray
    duals_ineq: np.ndarray
    duals_lower: np.ndarray
    duals_upper: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _status(st) -> str:
    S = clarabel.SolverStatus
    if st in (S.Solved, S.AlmostSolved):
        return OPTIMAL
    if st in (S.PrimalInfeasible, S.AlmostPrimalInfeasible):
        return INFEASIBLE
    if st in (S.DualInfeasible, S.AlmostDualInfeasible):
        return UNBOUNDED
    return ITERATION_LIMIT


def _settings(tol: float, max_iter: int):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_threads = 1
    s.max_iter = max_iter
    s.tol_gap_abs = tol
    s.tol_gap_rel = tol
    s.tol_feas = tol
    s.tol_ktratio = max(tol, 1e-7)
    s.presolve_enable = False
    return s


def solve_qp(qp: QuadraticProgram, tol: float = DEFAULT_TOL, max_iter: int = 200,
             check_psd: bool = True) -> QpSolution:
    """Solve ``qp`` by a primal-dual interior-point method.

    Rows are scaled to unit infinity norm before the solve; multipliers are
    mapped back to the caller's rows.  Fixed variables (lower == upper) are
    imposed as equality rows so the interior stays nonempty.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    qp.validate()
    if check_psd:
        qp.check_psd()
    n = qp.n
    lo, up = qp.lower, qp.upper
    fixed = np.flatnonzero(lo == up)
    has_lo = np.flatnonzero(np.isfinite(lo) & (lo != up))
    has_up = np.flatnonzero(np.isfinite(up) & (lo != up))
    I = sp.identity(n, format="csr")

    A_z = sp.vstack([qp.A_eq, I[fixed]], format="csr")
    b_z = np.concatenate([qp.b_eq, lo[fixed]])
    A_n = sp.vstack([qp.A_ineq, -I[has_lo], I[has_up]], format="csr")
    b_n = np.concatenate([qp.b_ineq, -lo[has_lo], up[has_up]])
    A = sp.vstack([A_z, A_n], format="csr")
    b = np.concatenate([b_z, b_n])

    row_scale = np.ones(A.shape[0])
    if A.shape[0]:
        norms = abs(A).max(axis=1).toarray().ravel()
        row_scale = np.where(norms > 0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    A_s = sp.diags(row_scale) @ A
    b_s = b * row_scale
    obj_scale = 1.0
    mx = max(abs(qp.Q).max() if qp.Q.nnz else 0.0, np.abs(qp.c).max(initial=0.0))
    if mx > 0:
        obj_scale = 1.0 / mx
    P = sp.triu(qp.Q * obj_scale, format="csc")
    q = qp.c * obj_scale

    cones = []
    if A_z.shape[0]:
        cones.append(clarabel.ZeroConeT(A_z.shape[0]))
    if A_n.shape[0]:
        cones.append(clarabel.NonnegativeConeT(A_n.shape[0]))
    if not cones:
        # clarabel needs at least one row
        A_s = sp.csr_matrix((1, n))
        b_s = np.zeros(1)
        cones = [clarabel.NonnegativeConeT(1)]
        row_scale = np.ones(1)

    solver = clarabel.DefaultSolver(P, q, sp.csc_matrix(A_s), b_s, cones, _settings(tol, max_iter))
    res = solver.solve()
    status = _status(res.status)
    x = np.array(res.x)
    z = np.array(res.z) * row_scale / obj_scale

    nz, ne = qp.A_eq.shape[0], qp.A_ineq.shape[0]
    nf, nl = fixed.size, has_lo.size
    m_z = A_z.shape[0]
    y = -z[:nz]
    zfix = -z[nz:nz + nf]
    zn = z[m_z:m_z + A_n.shape[0]] if A_n.shape[0] else np.zeros(0)
    z_in = zn[:ne]
    z_lo = np.zeros(n)
    z_up = np.zeros(n)
    z_lo[has_lo] = zn[ne:ne + nl]
    z_up[has_up] = zn[ne + nl:]
    # a fixed variable's multiplier splits by sign into lower/upper
    z_lo[fixed] = np.maximum(zfix, 0.0)
    z_up[fixed] = np.maximum(-zfix, 0.0)
    if status == OPTIMAL:
        x[fixed] = lo[fixed]
        obj = qp.objective(x)
    else:
        obj = np.nan if status != UNBOUNDED else -np.inf
    return QpSolution(x, y, z_in, z_lo, z_up, obj, status, iterations=int(res.iterations),
                      info={"solver_status": str(res.status), "solve_time": res.solve_time})


@dataclass
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.stationarity, self.primal, self.dual, self.complementarity) <= self.tol

    def as_dict(self) -> dict:
        return {"stationarity": self.stationarity, "primal": self.primal, "dual": self.dual,
                "complementarity": self.complementarity, "passed": self.passed}


def check_kkt(qp: QuadraticProgram, sol: QpSolution, tol: float = 1e-6) -> KktReport:
    """Infinity norms of the four KKT residual blocks at ``sol``."""
    x = sol.x
    grad = qp.Q @ x + qp.c - qp.A_eq.T @ sol.duals_eq + qp.A_ineq.T @ sol.duals_ineq \
        - sol.duals_lower + sol.duals_upper
    stat = np.abs(grad).max(initial=0.0)

    r_eq = np.abs(qp.A_eq @ x - qp.b_eq).max(initial=0.0)
    slack = qp.b_ineq - qp.A_ineq @ x
    r_in = np.maximum(-slack, 0.0).max(initial=0.0)
    r_lo = np.maximum(qp.lower - x, 0.0).max(initial=0.0)
    r_up = np.maximum(x - qp.upper, 0.0).max(initial=0.0)
    primal = max(r_eq, r_in, r_lo, r_up)

    dual = max(0.0, -sol.duals_ineq.min(initial=0.0), -sol.duals_lower.min(initial=0.0),
               -sol.duals_upper.min(initial=0.0))

    fin_lo = np.isfinite(qp.lower)
    fin_up = np.isfinite(qp.upper)
    comp = max(
        np.abs(sol.duals_ineq * slack).max(initial=0.0),
        np.abs(sol.duals_lower[fin_lo] * (x[fin_lo] - qp.lower[fin_lo])).max(initial=0.0),
        np.abs(sol.duals_upper[fin_up] * (qp.upper[fin_up] - x[fin_up])).max(initial=0.0),
    )
    # multipliers on infinite bounds must vanish
    stray = max(np.abs(sol.duals_lower[~fin_lo]).max(initial=0.0),
                np.abs(sol.duals_upper[~fin_up]).max(initial=0.0))
    comp = max(comp, stray)
    return KktReport(float(stat), float(primal), float(dual), float(comp), tol)
