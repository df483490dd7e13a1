"""Dense linear programming kernel.

Two interchangeable engines sit behind :func:`solve_lp`:

* a bounded-variable primal simplex written here (two phases, explicit
  basis inverse with periodic refactorization, Bland's rule fallback after
  a streak of degenerate pivots), used by default on small problems and in
  all kernel-level tests;
* ``scipy.optimize.linprog`` (HiGHS) for problems past a size threshold,
  where a dense tableau would be too slow.

Both return the same :class:`LpSolution` contract.  Dual signs follow the
minimization convention: ``>=`` rows have nonnegative duals, ``<=`` rows
nonpositive, equalities free; for maximization the signs flip with the
objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog as _scipy_linprog

from .errors import DimensionError, IterationLimitError, SolverError

GE = ">="
LE = "<="
EQ = "=="

_SENSES = (GE, LE, EQ)

# Problems with more rows than this are routed to HiGHS under engine="auto".
AUTO_ENGINE_ROW_LIMIT = 120

_STATUS_OPTIMAL = "optimal"
_STATUS_INFEASIBLE = "infeasible"
_STATUS_UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical tolerances shared by the LP and MIP layers."""

    tol_feas: float = 1e-7
    tol_opt: float = 1e-7
    tol_pivot: float = 1e-9
    iteration_limit: int = 100_000


DEFAULT_TOL = SolverTolerances()


@dataclass
class LinearProgram:
    """A dense LP: optimize ``objective @ x`` subject to row constraints and bounds.

    Attributes:
        objective: length-n cost vector.
        constraint_matrix: dense (m, n) array.
        senses: per-row comparison, each one of ``">="``, ``"<="``, ``"=="``.
        rhs: length-m right-hand side.
        bounds: per-variable (lower, upper) pairs; ``None`` or ``+-inf`` mean free.
        direction: ``"min"`` or ``"max"``.
    """

    objective: np.ndarray
    constraint_matrix: np.ndarray
    senses: tuple
    rhs: np.ndarray
    bounds: list | None = None
    direction: str = "min"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        self.constraint_matrix = np.atleast_2d(
            np.asarray(self.constraint_matrix, dtype=float)
        )
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = tuple(self.senses)
        m, n = self.constraint_matrix.shape
        if self.objective.shape[0] != n:
            raise DimensionError(
                f"objective has {self.objective.shape[0]} entries, matrix has {n} columns"
            )
        if self.rhs.shape[0] != m or len(self.senses) != m:
            raise DimensionError("rhs/senses length must equal the row count")
        for s in self.senses:
            if s not in _SENSES:
                raise DimensionError(f"unknown sense {s!r}")
        if self.direction not in ("min", "max"):
            raise DimensionError(f"direction must be 'min' or 'max', got {self.direction!r}")
        if self.bounds is None:
            self.bounds = [(None, None)] * n
        if len(self.bounds) != n:
            raise DimensionError("bounds length must equal the variable count")
        lo, hi = self.bound_arrays()
        if np.any(lo > hi):
            raise DimensionError("every lower bound must be <= its upper bound")
        if not (
            np.all(np.isfinite(self.constraint_matrix))
            and np.all(np.isfinite(self.rhs))
            and np.all(np.isfinite(self.objective))
        ):
            raise DimensionError("matrix, rhs and objective entries must be finite")

    @property
    def n_vars(self) -> int:
        return self.constraint_matrix.shape[1]

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]

    def bound_arrays(self):
        lo = np.array(
            [-np.inf if b[0] is None else float(b[0]) for b in self.bounds]
        )
        hi = np.array(
            [np.inf if b[1] is None else float(b[1]) for b in self.bounds]
        )
        return lo, hi


@dataclass
class LpSolution:
    """Result of an LP solve.

    ``duals`` has one entry per constraint row.  ``basis`` lists the basic
    variable indexes in standard form (structural variables first, then one
    slack per inequality row); the HiGHS engine does not expose a basis and
    reports ``None``.
    """

    status: str
    x: np.ndarray | None
    objective_value: float | None
    duals: np.ndarray | None
    basis: tuple | None = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == _STATUS_OPTIMAL


def solve_lp(
    lp: LinearProgram,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> LpSolution:
    """Solve an LP with the configured engine.

    engine: "auto" routes by problem size, "simplex" forces the internal
    tableau code, "highs" forces scipy's HiGHS.
    """
    if engine == "auto":
        engine = "highs" if lp.n_rows > AUTO_ENGINE_ROW_LIMIT else "simplex"
    if engine == "simplex":
        return _solve_simplex(lp, tol)
    if engine == "highs":
        return _solve_highs(lp, tol)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# HiGHS bridge


class HighsForm:
    """A problem pre-converted to HiGHS inputs, reusable across bound changes.

    Branch-and-bound re-solves the same rows with different variable bounds
    thousands of times; caching the sparse conversion here keeps the per-node
    cost at the solve itself.
    """

    def __init__(self, lp: LinearProgram, tol: SolverTolerances = DEFAULT_TOL):
        self.sign = 1.0 if lp.direction == "min" else -1.0
        self.c = self.sign * lp.objective
        self.n_rows = lp.n_rows
        self.ge = [i for i, s in enumerate(lp.senses) if s == GE]
        self.le = [i for i, s in enumerate(lp.senses) if s == LE]
        self.eq = [i for i, s in enumerate(lp.senses) if s == EQ]
        A = lp.constraint_matrix
        blocks, rhs = [], []
        if self.le:
            blocks.append(A[self.le])
            rhs.append(lp.rhs[self.le])
        if self.ge:
            blocks.append(-A[self.ge])
            rhs.append(-lp.rhs[self.ge])
        self.A_ub = sp.csr_matrix(np.vstack(blocks)) if blocks else None
        self.b_ub = np.concatenate(rhs) if rhs else None
        self.A_eq = sp.csr_matrix(A[self.eq]) if self.eq else None
        self.b_eq = lp.rhs[self.eq] if self.eq else None
        self.options = {
            "primal_feasibility_tolerance": max(tol.tol_feas, 1e-10),
            "dual_feasibility_tolerance": max(tol.tol_opt, 1e-10),
        }

    def solve(self, bounds) -> LpSolution:
        res = _scipy_linprog(
            self.c,
            A_ub=self.A_ub,
            b_ub=self.b_ub,
            A_eq=self.A_eq,
            b_eq=self.b_eq,
            bounds=bounds,
            method="highs",
            options=self.options,
        )
        if res.status == 1:
            raise IterationLimitError("HiGHS hit its iteration limit")
        if res.status == 4:
            raise SolverError(f"HiGHS numerical failure: {res.message}")
        if res.status == 2:
            return LpSolution(_STATUS_INFEASIBLE, None, None, None)
        if res.status == 3:
            return LpSolution(_STATUS_UNBOUNDED, None, None, None)

        sign = self.sign
        duals = np.zeros(self.n_rows)
        if self.le or self.ge:
            marg = np.asarray(res.ineqlin.marginals)
            k = 0
            for i in self.le:
                duals[i] = sign * marg[k]
                k += 1
            for i in self.ge:
                duals[i] = -sign * marg[k]
                k += 1
        if self.eq:
            duals[self.eq] = sign * np.asarray(res.eqlin.marginals)
        return LpSolution(
            _STATUS_OPTIMAL,
            np.asarray(res.x, dtype=float),
            float(sign * res.fun),
            duals,
            basis=None,
            iterations=int(getattr(res, "nit", 0)),
        )


def _solve_highs(lp: LinearProgram, tol: SolverTolerances) -> LpSolution:
    return HighsForm(lp, tol).solve(lp.bounds)


# ---------------------------------------------------------------------------
# Internal bounded-variable primal simplex

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE_ZERO = 3

# Consecutive degenerate pivots tolerated before switching to Bland's rule.
_DEGENERATE_STREAK = 30
_REFACTOR_EVERY = 64


class _Tableau:
    def __init__(self, A, b, lo, hi, tol):
        self.A = A
        self.b = b
        self.lo = lo
        self.hi = hi
        self.tol = tol
        self.m, self.n = A.shape
        self.values = np.zeros(self.n)
        self.status = np.empty(self.n, dtype=np.int8)
        for j in range(self.n):
            if np.isfinite(lo[j]):
                self.values[j] = lo[j]
                self.status[j] = _AT_LOWER
            elif np.isfinite(hi[j]):
                self.values[j] = hi[j]
                self.status[j] = _AT_UPPER
            else:
                self.values[j] = 0.0
                self.status[j] = _FREE_ZERO
        self.basis = np.empty(self.m, dtype=np.int64)
        self.binv = np.eye(self.m)
        self.pivots_since_refactor = 0

    def set_basis(self, basis):
        self.basis = np.asarray(basis, dtype=np.int64).copy()
        self.refactor()
        self.status[self.basis] = _BASIC

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis matrix") from exc
        self.pivots_since_refactor = 0
        self.solve_basics()

    def solve_basics(self):
        z = self.values.copy()
        z[self.basis] = 0.0
        self.values[self.basis] = self.binv @ (self.b - self.A @ z)

    def reduced_costs(self, c):
        y = c[self.basis] @ self.binv
        return c - y @ self.A, y

    def pivot(self, entering, leaving_pos, w):
        leaving = self.basis[leaving_pos]
        self.basis[leaving_pos] = entering
        self.status[entering] = _BASIC
        piv = w[leaving_pos]
        row = self.binv[leaving_pos] / piv
        correction = np.outer(w, row)
        correction[leaving_pos] = 0.0
        self.binv -= correction
        self.binv[leaving_pos] = row
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= _REFACTOR_EVERY:
            self.refactor()
        return leaving


def _run_simplex(tab, c, b, tol, iter_budget):
    """Optimize c over the current tableau state; returns iterations used."""
    degenerate_streak = 0
    iters = 0
    while True:
        if iters >= iter_budget:
            raise IterationLimitError(
                f"simplex iteration limit ({iter_budget}) exceeded"
            )
        iters += 1
        d, _ = tab.reduced_costs(c)
        use_bland = degenerate_streak >= _DEGENERATE_STREAK

        score = np.where(tab.status == _AT_UPPER, d, -d)
        np.maximum(score, np.where(tab.status == _FREE_ZERO, d, -np.inf), out=score)
        score[tab.status == _BASIC] = -np.inf
        if use_bland:
            eligible = np.nonzero(score > tol.tol_opt)[0]
            entering = int(eligible[0]) if eligible.size else -1
        else:
            entering = int(np.argmax(score))
            if score[entering] <= tol.tol_opt:
                entering = -1
        if entering < 0:
            return iters

        dj = d[entering]
        st = tab.status[entering]
        if st == _AT_UPPER or (st == _FREE_ZERO and dj > 0):
            direction = -1.0
        else:
            direction = 1.0

        w = tab.binv @ tab.A[:, entering]
        # Basic variable movement per unit step: -direction * w.
        move = -direction * w
        vals = tab.values[tab.basis]
        up = move > tol.tol_pivot
        down = move < -tol.tol_pivot
        caps = np.where(up, tab.hi[tab.basis], np.where(down, tab.lo[tab.basis], np.nan))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = (caps - vals) / move
        ratios[~(up | down)] = np.inf
        ratios[~np.isfinite(caps)] = np.inf
        np.maximum(ratios, 0.0, out=ratios)

        t_best = float(ratios.min(initial=np.inf))
        leaving_pos = -1
        leaving_to = None
        if np.isfinite(t_best):
            ties = np.nonzero(ratios <= t_best + tol.tol_pivot)[0]
            leaving_pos = int(ties[np.argmax(np.abs(w[ties]))])
            leaving_to = _AT_UPPER if up[leaving_pos] else _AT_LOWER

        span = tab.hi[entering] - tab.lo[entering]
        bound_flip = np.isfinite(span) and span < t_best
        if bound_flip:
            t_best = span

        if not np.isfinite(t_best):
            return -1  # unbounded direction

        t_best = max(t_best, 0.0)
        tab.values[tab.basis] += t_best * move
        tab.values[entering] += direction * t_best

        if bound_flip:
            tab.status[entering] = (
                _AT_UPPER if tab.status[entering] == _AT_LOWER else _AT_LOWER
            )
        else:
            left = tab.pivot(entering, leaving_pos, w)
            tab.status[left] = leaving_to
            cap = tab.hi[left] if leaving_to == _AT_UPPER else tab.lo[left]
            tab.values[left] = cap

        degenerate_streak = degenerate_streak + 1 if t_best <= tol.tol_pivot else 0


def _solve_simplex(lp: LinearProgram, tol: SolverTolerances) -> LpSolution:
    sign = 1.0 if lp.direction == "min" else -1.0
    m, n = lp.n_rows, lp.n_vars
    lo_x, hi_x = lp.bound_arrays()

    slack_rows = [i for i, s in enumerate(lp.senses) if s != EQ]
    n_slack = len(slack_rows)
    n_total = n + n_slack

    A = np.zeros((m, n_total))
    A[:, :n] = lp.constraint_matrix
    lo = np.concatenate([lo_x, np.zeros(n_slack)])
    hi = np.concatenate([hi_x, np.full(n_slack, np.inf)])
    for pos, i in enumerate(slack_rows):
        # ">=": a.x - s = b ; "<=": a.x + s = b, slack s >= 0 either way.
        A[i, n + pos] = -1.0 if lp.senses[i] == GE else 1.0

    b = lp.rhs.astype(float)

    # Phase 1: one artificial per row covering the initial residual.
    tab = _Tableau(
        np.hstack([A, np.zeros((m, m))]),
        b,
        np.concatenate([lo, np.zeros(m)]),
        np.concatenate([hi, np.full(m, np.inf)]),
        tol,
    )
    resid = b - A @ tab.values[:n_total]
    for i in range(m):
        tab.A[i, n_total + i] = 1.0 if resid[i] >= 0 else -1.0
    tab.set_basis(np.arange(n_total, n_total + m))
    tab.values[n_total:] = np.abs(resid)

    c_phase1 = np.zeros(n_total + m)
    c_phase1[n_total:] = 1.0
    budget = tol.iteration_limit
    used = _run_simplex(tab, c_phase1, b, tol, budget)
    if used < 0:
        raise SolverError("phase-1 objective unbounded below zero")
    infeas = float(c_phase1 @ tab.values)
    scale = 1.0 + float(np.abs(b).max(initial=0.0))
    if infeas > tol.tol_feas * scale:
        return LpSolution(_STATUS_INFEASIBLE, None, None, None, iterations=used)

    # Phase 2: lock artificials at zero and optimize the true objective.
    tab.lo[n_total:] = 0.0
    tab.hi[n_total:] = 0.0
    tab.values[n_total:][tab.status[n_total:] != _BASIC] = 0.0
    c_phase2 = np.zeros(n_total + m)
    c_phase2[:n] = sign * lp.objective
    used2 = _run_simplex(tab, c_phase2, b, tol, budget - used)
    if used2 < 0:
        return LpSolution(
            _STATUS_UNBOUNDED, None, None, None, iterations=used
        )

    x = tab.values[:n].copy()
    obj = float(lp.objective @ x)
    _, y = tab.reduced_costs(c_phase2)
    duals = sign * y
    basis = tuple(int(j) for j in sorted(tab.basis) if j < n_total)
    return LpSolution(
        _STATUS_OPTIMAL, x, obj, duals, basis=basis, iterations=used + used2
    )


def dual_objective_value(lp: LinearProgram, sol: LpSolution) -> float:
    """Bounded-dual objective for an optimal solution, for duality-gap checks."""
    if not sol.is_optimal:
        raise SolverError("dual objective only defined at optimality")
    y = sol.duals
    reduced = lp.objective - y @ lp.constraint_matrix
    lo, hi = lp.bound_arrays()
    if lp.direction == "max":
        reduced = -reduced
    total = float(lp.rhs @ y) if lp.direction == "min" else -float(lp.rhs @ y)
    for j in range(lp.n_vars):
        d = reduced[j]
        if d > 0 and np.isfinite(lo[j]):
            total += d * lo[j]
        elif d < 0 and np.isfinite(hi[j]):
            total += d * hi[j]
    return total if lp.direction == "min" else -total
