from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from regionlab.models.errors import InfeasibleRegionError, SolverFailureError
from regionlab.models.regions import HalfspaceSystem


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective.y  s.t.  A y <= rhs,  lower <= y <= upper (bounds may be infinite)"""

    objective: np.ndarray
    A: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        objective = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        n = objective.shape[0]
        A = np.asarray(self.A, dtype=np.float64).reshape(-1, n)
        rhs = np.asarray(self.rhs, dtype=np.float64).reshape(-1)
        lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        if rhs.shape[0] != A.shape[0] or lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("inconsistent linear program dimensions")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(rhs)) and np.all(np.isfinite(objective))):
            raise ValueError("linear program rows must be finite")
        for name, value in (("objective", objective), ("A", A), ("rhs", rhs), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, value)

    @property
    def variable_count(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    y: Optional[np.ndarray] = None
    objective_value: float = float("nan")
    iterations: int = 0


class _BasisSimplex:
    """Explicit basis inverse, pricing loop and ratio test shared by both simplex
    variants. Subclasses lay out the columns and the right-hand side `b_bar`."""

    def _column(self, j) -> np.ndarray:
        raise NotImplementedError

    def _reduced_costs(self, cost) -> np.ndarray:
        raise NotImplementedError

    def _refactor(self):
        if self.basis.size == 0:
            return
        B = np.column_stack([self._column(j) for j in self.basis])
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise SolverFailureError("singular basis during refactorization")
        self.x_B = self.Binv @ self.b_bar

    def _pivot(self, r, q, u):
        theta = self.x_B[r] / u[r]
        self.x_B -= theta * u
        self.x_B[r] = theta
        pivot_row = self.Binv[r] / u[r]
        rows = np.flatnonzero(u)
        self.Binv[rows] -= np.outer(u[rows], pivot_row)
        self.Binv[r] = pivot_row
        self.in_basis[self.basis[r]] = False
        self.in_basis[q] = True
        self.basis[r] = q
        self.iterations += 1
        if self.iterations % self.refactor_every == 0:
            self._refactor()

    def _run(self, cost, allowed, phase):
        """Simplex iterations from the current basis; returns LpStatus"""
        degenerate = 0
        while True:
            if self.iterations >= self.max_iterations:
                raise SolverFailureError(f"simplex stalled after {self.iterations} pivots in {phase}")
            d = self._reduced_costs(cost)
            candidates = np.flatnonzero(allowed & ~self.in_basis & (d < -self.optimality_tol))
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            bland = degenerate >= self.bland_after
            q = candidates[0] if bland else candidates[np.argmin(d[candidates])]
            u = self.Binv @ self._column(q)
            positive = np.flatnonzero(u > self.pivot_tol)
            if positive.size == 0:
                if phase == "phase 1":
                    raise SolverFailureError("phase 1 reported an unbounded direction")
                return LpStatus.UNBOUNDED
            ratios = np.maximum(self.x_B[positive], 0.0) / u[positive]
            theta = ratios.min()
            ties = positive[ratios <= theta + 1e-12]
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(u[ties])]
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            self.x_B[r] = max(self.x_B[r], 0.0)
            self._pivot(r, q, u)

    def _certified(self, y, tol=1e-7) -> bool:
        lp = self.lp
        if lp.A.shape[0] and np.any(lp.A @ y - lp.rhs > tol * self.row_norms):
            return False
        return bool(np.all(y >= lp.lower - tol) and np.all(y <= lp.upper + tol))


class RevisedSimplex(_BasisSimplex):
    """Dense revised simplex with an explicit basis inverse.

    The program is moved to standard form (shifted/split variables, one slack per
    row, artificials for rows with a negative right-hand side). Phase 1 minimizes
    the artificials, phase 2 the negated objective. Pricing is Dantzig's rule and
    switches to Bland's rule after `bland_after` consecutive degenerate pivots.
    After a solve the optimal basis is kept, so `resolve` only runs phase 2.
    """

    def __init__(
        self,
        lp: LinearProgram,
        pivot_tol=1e-9,
        optimality_tol=1e-9,
        feasibility_tol=1e-9,
        max_iterations=None,
        refactor_every=100,
        bland_after=50,
    ):
        self.lp = lp
        self.pivot_tol = pivot_tol
        self.optimality_tol = optimality_tol
        self.feasibility_tol = feasibility_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self._standard_form()
        m, ns = self.A_bar.shape
        self.max_iterations = max_iterations or 50 * (m + ns) + 1000
        self._ready = False

    def _standard_form(self):
        lp = self.lp
        n = lp.variable_count
        columns, offset, upper_rows = [], np.zeros(n), []
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                columns.append((j, 1.0))
                if np.isfinite(hi):
                    upper_rows.append((len(columns) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                columns.append((j, -1.0))
            else:
                columns.append((j, 1.0))
                columns.append((j, -1.0))
        Q = np.zeros((n, len(columns)))
        for k, (j, sign) in enumerate(columns):
            Q[j, k] = sign
        A_std = lp.A @ Q
        rhs = lp.rhs - lp.A @ offset
        if upper_rows:
            extra = np.zeros((len(upper_rows), len(columns)))
            for i, (k, _) in enumerate(upper_rows):
                extra[i, k] = 1.0
            A_std = np.vstack([A_std, extra])
            rhs = np.concatenate([rhs, [width for _, width in upper_rows]])
        self.Q = Q
        self.offset = offset
        self.bounds_conflict = bool(np.any(lp.lower > lp.upper))
        self.sigma = np.where(rhs < 0, -1.0, 1.0)
        self.A_bar = self.sigma[:, None] * A_std
        self.b_bar = self.sigma * rhs
        self.row_norms = np.maximum(1.0, np.linalg.norm(lp.A, axis=1))

    # column layout: [structural | slack | artificial]
    def _column(self, j) -> np.ndarray:
        m, ns = self.A_bar.shape
        if j < ns:
            return self.A_bar[:, j]
        col = np.zeros(m)
        if j < ns + m:
            col[j - ns] = self.sigma[j - ns]
        else:
            col[j - ns - m] = 1.0
        return col

    def _reduced_costs(self, cost):
        m, ns = self.A_bar.shape
        pi = cost[self.basis] @ self.Binv
        d = np.empty(ns + 2 * m)
        d[:ns] = cost[:ns] - pi @ self.A_bar
        d[ns : ns + m] = cost[ns : ns + m] - pi * self.sigma
        d[ns + m :] = cost[ns + m :] - pi
        return d

    def _phase_one(self):
        m, ns = self.A_bar.shape
        total = ns + 2 * m
        self.basis = np.array([ns + i if self.sigma[i] > 0 else ns + m + i for i in range(m)], dtype=np.int64)
        self.in_basis = np.zeros(total, dtype=bool)
        self.in_basis[self.basis] = True
        self.Binv = np.eye(m)
        self.x_B = self.b_bar.copy()
        self.iterations = 0

        artificial = np.zeros(total, dtype=bool)
        artificial[ns + m :] = self.sigma < 0
        if not artificial.any():
            return True
        allowed = np.ones(total, dtype=bool)
        allowed[ns + m :] = artificial[ns + m :]
        cost = artificial.astype(np.float64)
        self._run(cost, allowed, phase="phase 1")
        self._refactor()
        infeasibility = self.x_B[self.basis >= ns + m].sum()
        if infeasibility > self.feasibility_tol * max(1.0, np.abs(self.b_bar).max()):
            return False
        self._drive_out_artificials()
        return True

    def _drive_out_artificials(self):
        m, ns = self.A_bar.shape
        for r in np.flatnonzero(self.basis >= ns + m):
            row = self.Binv[r]
            alpha = np.concatenate([row @ self.A_bar, row * self.sigma])
            alpha[self.in_basis[: ns + m]] = 0.0
            q = int(np.argmax(np.abs(alpha)))
            if abs(alpha[q]) <= self.pivot_tol:
                continue
            self._pivot(r, q, self.Binv @ self._column(q))
        self._refactor()

    def _phase_two_cost(self, objective):
        m, ns = self.A_bar.shape
        cost = np.zeros(ns + 2 * m)
        cost[:ns] = -(self.Q.T @ objective)
        allowed = np.ones(ns + 2 * m, dtype=bool)
        allowed[ns + m :] = False
        return cost, allowed

    def _solution(self, objective, status) -> LpSolution:
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status, iterations=self.iterations)
        m, ns = self.A_bar.shape
        values = np.zeros(ns + 2 * m)
        values[self.basis] = np.maximum(self.x_B, 0.0)
        y = self.offset + self.Q @ values[:ns]
        if not self._certified(y):
            self._refactor()
            values[:] = 0.0
            values[self.basis] = np.maximum(self.x_B, 0.0)
            y = self.offset + self.Q @ values[:ns]
            if not self._certified(y):
                raise SolverFailureError("optimal point violates the constraints beyond tolerance")
        return LpSolution(LpStatus.OPTIMAL, y, float(objective @ y), self.iterations)

    def solve(self) -> LpSolution:
        if self.bounds_conflict:
            return LpSolution(LpStatus.INFEASIBLE)
        if not self._phase_one():
            self._ready = False
            return LpSolution(LpStatus.INFEASIBLE, iterations=self.iterations)
        self._ready = True
        return self._phase_two(self.lp.objective)

    def _phase_two(self, objective) -> LpSolution:
        cost, allowed = self._phase_two_cost(objective)
        status = self._run(cost, allowed, phase="phase 2")
        return self._solution(objective, status)

    def resolve(self, objective) -> LpSolution:
        """Re-optimize a new objective over the same constraints from the last basis"""
        objective = np.asarray(objective, dtype=np.float64).reshape(-1)
        if not self._ready:
            solution = self.solve()
            if solution.status is LpStatus.INFEASIBLE:
                return solution
        self.iterations = 0
        return self._phase_two(objective)


class BoundedDualSimplex(_BasisSimplex):
    """Revised simplex on the dual of a program whose variables are all boxed.

    max c.y  s.t.  A y <= rhs,  lower <= y <= upper  has the dual
    min rhs.l + upper.u - lower.v  s.t.  A^T l + u - v = c,  l, u, v >= 0,
    whose basis holds one column per primal variable however many rows A has.
    Taking u_j or v_j by the sign of c_j is a feasible start, so there is no
    phase 1, and the simplex multipliers of an optimal basis are the primal
    optimum. The start is solved with a slightly perturbed c to keep the pivots
    off the degenerate vertex; dual simplex pivots then restore the exact c.
    `resolve` reuses the last basis the same way.
    """

    def __init__(
        self,
        lp: LinearProgram,
        pivot_tol=1e-9,
        optimality_tol=1e-9,
        feasibility_tol=1e-9,
        max_iterations=None,
        refactor_every=100,
        bland_after=50,
        perturbation=1e-7,
    ):
        if not (np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper))):
            raise ValueError("the bounded dual simplex needs finite bounds on every variable")
        self.lp = lp
        self.pivot_tol = pivot_tol
        self.optimality_tol = optimality_tol
        self.feasibility_tol = feasibility_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.perturbation = perturbation
        m, n = lp.A.shape
        self.cost = np.concatenate([lp.rhs, lp.upper, -lp.lower])
        self.allowed = np.ones(m + 2 * n, dtype=bool)
        self.row_norms = np.maximum(1.0, np.linalg.norm(lp.A, axis=1))
        self.max_iterations = max_iterations or 50 * (m + 3 * n) + 1000
        self.iterations = 0
        self._ready = False

    # column layout: [rows of A | upper bounds | lower bounds]
    def _column(self, j) -> np.ndarray:
        m, n = self.lp.A.shape
        if j < m:
            return self.lp.A[j]
        col = np.zeros(n)
        col[(j - m) % n] = 1.0 if j < m + n else -1.0
        return col

    def _reduced_costs(self, cost):
        m, n = self.lp.A.shape
        pi = cost[self.basis] @ self.Binv
        d = np.empty(m + 2 * n)
        d[:m] = cost[:m] - self.lp.A @ pi
        d[m : m + n] = cost[m : m + n] - pi
        d[m + n :] = cost[m + n :] + pi
        return d

    def _row(self, v) -> np.ndarray:
        m, n = self.lp.A.shape
        alpha = np.empty(m + 2 * n)
        alpha[:m] = self.lp.A @ v
        alpha[m : m + n] = v
        alpha[m + n :] = -v
        return alpha

    def _crash(self, objective):
        m, n = self.lp.A.shape
        signs = np.where(objective >= 0, 1.0, -1.0)
        self.basis = np.where(signs > 0, m + np.arange(n), m + n + np.arange(n)).astype(np.int64)
        self.in_basis = np.zeros(m + 2 * n, dtype=bool)
        self.in_basis[self.basis] = True
        self.Binv = np.diag(signs)
        spread = self.perturbation * max(1.0, np.abs(objective).max()) * (1.0 + np.arange(n) / n)
        self.b_bar = objective + signs * spread
        self.x_B = np.abs(self.b_bar)

    def _set_objective(self, objective):
        self.objective = objective
        self.b_bar = objective.copy()
        self.x_B = self.Binv @ objective

    def _dual_pivots(self):
        """Dual simplex pivots until the basic dual values are nonnegative"""
        threshold = -self.feasibility_tol * max(1.0, np.abs(self.objective).max())
        while True:
            if self.iterations >= self.max_iterations:
                raise SolverFailureError(f"simplex stalled after {self.iterations} pivots in the dual cleanup")
            r = int(np.argmin(self.x_B))
            if self.x_B[r] >= threshold:
                return
            alpha = self._row(self.Binv[r])
            candidates = np.flatnonzero(~self.in_basis & (alpha < -self.pivot_tol))
            if candidates.size == 0:
                raise SolverFailureError("dual ratio test found no entering column")
            d = self._reduced_costs(self.cost)
            ratios = np.maximum(d[candidates], 0.0) / -alpha[candidates]
            q = candidates[np.argmin(ratios)]
            self._pivot(r, q, self.Binv @ self._column(q))

    def _optimize(self) -> LpSolution:
        for _ in range(2):
            if self._run(self.cost, self.allowed, phase="the bounded dual") is LpStatus.UNBOUNDED:
                self._ready = False
                return LpSolution(LpStatus.INFEASIBLE, iterations=self.iterations)
            self._set_objective(self.objective)
            self._dual_pivots()
            y = self.cost[self.basis] @ self.Binv
            if self._certified(y):
                self._ready = True
                return LpSolution(LpStatus.OPTIMAL, y, float(self.objective @ y), self.iterations)
            self._refactor()
        raise SolverFailureError("optimal point violates the constraints beyond tolerance")

    def solve(self) -> LpSolution:
        self.iterations = 0
        if np.any(self.lp.lower > self.lp.upper):
            return LpSolution(LpStatus.INFEASIBLE)
        self.objective = self.lp.objective
        self._crash(self.objective)
        return self._optimize()

    def resolve(self, objective) -> LpSolution:
        """Re-optimize a new objective over the same constraints from the last basis"""
        objective = np.asarray(objective, dtype=np.float64).reshape(-1)
        if not self._ready:
            self.iterations = 0
            if np.any(self.lp.lower > self.lp.upper):
                return LpSolution(LpStatus.INFEASIBLE)
            self.objective = objective
            self._crash(objective)
            return self._optimize()
        self.iterations = 0
        self._set_objective(objective)
        return self._optimize()


def has_finite_bounds(lp: LinearProgram) -> bool:
    return bool(np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper)))


def make_solver(lp: LinearProgram, **kwargs):
    """The bounded dual simplex when every variable is boxed, the standard form one otherwise"""
    if has_finite_bounds(lp):
        return BoundedDualSimplex(lp, **kwargs)
    return RevisedSimplex(lp, **kwargs)


def solve_lp(lp: LinearProgram, **kwargs) -> LpSolution:
    return make_solver(lp, **kwargs).solve()


@dataclass(frozen=True)
class InsphereResult:
    center: np.ndarray
    inradius: float


@dataclass(frozen=True)
class RedundancyVerdict:
    index: int
    minimum: float
    redundant: bool


def insphere(system: HalfspaceSystem) -> InsphereResult:
    """Largest ball inside the region and its box:
    max r  s.t.  w_i.x - r |w_i| + b_i >= 0,  box_lo + r <= x <= box_hi - r"""
    d = system.dim
    norms = np.linalg.norm(system.W, axis=1)
    eye = np.eye(d)
    A = np.vstack(
        [
            np.hstack([-system.W, norms[:, None]]),
            np.hstack([-eye, np.ones((d, 1))]),
            np.hstack([eye, np.ones((d, 1))]),
        ]
    )
    rhs = np.concatenate([system.b, -system.box_lo, system.box_hi])
    objective = np.zeros(d + 1)
    objective[d] = 1.0
    # the box rows already imply these bounds; boxing every variable keeps the basis at d + 1 columns
    lower = np.concatenate([system.box_lo, [0.0]])
    upper = np.concatenate([system.box_hi, [0.5 * float(np.min(system.box_hi - system.box_lo))]])
    solution = solve_lp(LinearProgram(objective, A, rhs, lower, upper))
    if solution.status is not LpStatus.OPTIMAL:
        raise InfeasibleRegionError(f"insphere program is {solution.status.value}")
    return InsphereResult(solution.y[:d], float(max(solution.y[d], 0.0)))


def remove_redundant(system: HalfspaceSystem, tol: float = 1e-9) -> Tuple[HalfspaceSystem, List[RedundancyVerdict]]:
    """Sequentially drop every constraint whose minimum over the others is >= 0.

    Constraint k is tested against the currently retained others, its own relaxed
    copy w_k.x + b_k + 1 >= 0 and the box. Minima within tol * max(1, |w_k|) of
    zero are snapped to 0 and count as redundant.
    """
    retained = list(range(system.count))
    verdicts = []
    for k in range(system.count):
        others = [i for i in retained if i != k]
        w_k, b_k = system.W[k], system.b[k]
        A = np.vstack([-system.W[others], -w_k[None, :]])
        rhs = np.concatenate([system.b[others], [b_k + 1.0]])
        try:
            solution = solve_lp(LinearProgram(-w_k, A, rhs, system.box_lo, system.box_hi))
        except SolverFailureError as error:
            raise SolverFailureError(str(error), constraint=k) from error
        if solution.status is not LpStatus.OPTIMAL:
            raise SolverFailureError(f"redundancy program is {solution.status.value}", constraint=k)
        minimum = float(w_k @ solution.y + b_k)
        if abs(minimum) <= tol * max(1.0, np.linalg.norm(w_k)):
            minimum = 0.0
        redundant = minimum >= 0.0
        verdicts.append(RedundancyVerdict(k, minimum, redundant))
        if redundant:
            retained.remove(k)
    return system.subset(retained), verdicts
