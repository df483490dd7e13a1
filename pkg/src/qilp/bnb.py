"""Branch-and-bound for LPs with binary variables.

Best-bound node selection with a depth-first plunge after every pop so an
incumbent appears early; branching picks the most fractional binary with
ties broken by lowest index.  Node LPs differ from the root only in the
binary bounds, so the relaxation is rebuilt cheaply per node.

When the objective restricted to the binaries is integral (and continuous
variables carry no cost), pruning uses the integer rounding of the bound.
Everything is deterministic for fixed inputs and configuration.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, SolverError
from .simplex import (
    AUTO_ENGINE_ROW_LIMIT,
    DEFAULT_TOL,
    HighsForm,
    LinearProgram,
    SolverTolerances,
    solve_lp,
)

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_LIMIT = "limit_reached"


@dataclass
class MixedBinaryProgram:
    """An LP plus the set of variable indexes constrained to {0, 1}."""

    base: LinearProgram
    binary_indices: tuple

    def __post_init__(self):
        self.binary_indices = tuple(int(j) for j in self.binary_indices)
        n = self.base.n_vars
        for j in self.binary_indices:
            if j < 0 or j >= n:
                raise DimensionError(f"binary index {j} out of range")
            lo, hi = self.base.bounds[j]
            lo = 0.0 if lo is None else lo
            hi = 1.0 if hi is None else hi
            if lo < -1e-12 or hi > 1.0 + 1e-12:
                raise DimensionError(
                    f"binary variable {j} must have bounds within [0, 1]"
                )
            self.base.bounds[j] = (max(lo, 0.0), min(hi, 1.0))


@dataclass
class BnBConfig:
    """Search controls.

    ``improvement_floor`` prunes nodes that cannot beat the incumbent by
    more than the given amount; callers whose objectives move in known
    quanta (e.g. cardinality plus a sub-quantum tie-break term) use it to
    get integer-style pruning without an exactly integral objective.
    """

    tol_int: float = 1e-6
    gap: float = 0.0
    node_limit: int = 200_000
    time_limit: float | None = None
    lp_tol: SolverTolerances = DEFAULT_TOL
    engine: str = "auto"
    improvement_floor: float = 0.0


DEFAULT_BNB = BnBConfig()


@dataclass
class MipSolution:
    """Incumbent, dual bound and search statistics of a branch-and-bound run.

    ``bound`` is the best proven bound in the problem's own direction; at
    optimality it coincides with the objective up to the gap setting.
    """

    status: str
    x: np.ndarray | None
    objective_value: float | None
    bound: float
    node_count: int

    @property
    def is_optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


def _objective_is_integral(prog: MixedBinaryProgram) -> bool:
    c = prog.base.objective
    mask = np.zeros(c.shape[0], dtype=bool)
    mask[list(prog.binary_indices)] = True
    if np.any(np.abs(c[~mask]) > 1e-12):
        return False
    cb = c[mask]
    return bool(np.all(np.abs(cb - np.round(cb)) <= 1e-9))


def solve_mip(prog: MixedBinaryProgram, cfg: BnBConfig = DEFAULT_BNB) -> MipSolution:
    """Solve a mixed-binary program exactly (up to cfg.gap)."""
    base = prog.base
    maximize = base.direction == "max"
    sign = -1.0 if maximize else 1.0  # work as a minimization on sign*obj
    binaries = np.array(prog.binary_indices, dtype=np.int64)
    integral = _objective_is_integral(prog)
    started = time.monotonic()

    root_lo = np.array([0.0 if b[0] is None else b[0] for b in base.bounds])
    root_hi = np.array([0.0 if b[1] is None else b[1] for b in base.bounds])
    free_lo = np.array([b[0] is None for b in base.bounds])
    free_hi = np.array([b[1] is None for b in base.bounds])

    engine = cfg.engine
    if engine == "auto":
        engine = "highs" if base.n_rows > AUTO_ENGINE_ROW_LIMIT else "simplex"
    highs_form = HighsForm(base, cfg.lp_tol) if engine == "highs" else None

    def relax(lo, hi):
        bounds = [
            (None if free_lo[j] else lo[j], None if free_hi[j] else hi[j])
            for j in range(base.n_vars)
        ]
        if highs_form is not None:
            return highs_form.solve(bounds)
        lp = LinearProgram(
            base.objective,
            base.constraint_matrix,
            base.senses,
            base.rhs,
            bounds=bounds,
            direction=base.direction,
        )
        return solve_lp(lp, cfg.lp_tol, "simplex")

    best_x = None
    best_obj = np.inf  # in minimization sense
    heap = []
    counter = 0
    nodes = 0
    heapq.heappush(heap, (-np.inf, counter, root_lo, root_hi))
    limit_hit = False

    def prunable(node_bound):
        if best_x is None:
            return False
        floor = cfg.improvement_floor
        if integral:
            # The true optimum is integral: nothing in (best-1, best] helps.
            floor = max(floor, 1.0 - 1e-7)
        if cfg.gap > 0:
            floor = max(floor, cfg.gap * max(1.0, abs(best_obj)))
        return node_bound >= best_obj - floor - 1e-12

    while heap:
        if nodes >= cfg.node_limit or (
            cfg.time_limit is not None
            and time.monotonic() - started > cfg.time_limit
        ):
            limit_hit = True
            break
        bound, _, lo, hi = heapq.heappop(heap)
        if prunable(bound):
            continue
        # Depth-first plunge from this node.
        lo = lo.copy()
        hi = hi.copy()
        while True:
            if nodes >= cfg.node_limit or (
                cfg.time_limit is not None
                and time.monotonic() - started > cfg.time_limit
            ):
                limit_hit = True
                break
            nodes += 1
            sol = relax(lo, hi)
            if sol.status == "infeasible":
                break
            if sol.status != "optimal":
                raise SolverError(f"node relaxation came back {sol.status}")
            node_obj = sign * sol.objective_value
            if prunable(node_obj):
                break
            worst = -1
            if binaries.shape[0]:
                vals = sol.x[binaries]
                frac = np.abs(vals - np.round(vals))
                worst = int(np.argmax(frac))
                if frac[worst] <= cfg.tol_int:
                    worst = -1
            if worst < 0:
                x = sol.x.copy()
                x[binaries] = np.round(x[binaries])
                if node_obj < best_obj - 1e-12:
                    best_obj = node_obj
                    best_x = x
                break
            j = int(binaries[worst])
            val = sol.x[j]
            up_first = val >= 0.5
            counter += 1
            if up_first:
                other = (node_obj, counter, lo.copy(), _fix(hi.copy(), j, 0.0))
                lo = _fix(lo, j, 1.0)
            else:
                other = (node_obj, counter, _fix(lo.copy(), j, 1.0), hi.copy())
                hi = _fix(hi, j, 0.0)
            heapq.heappush(heap, other)
        if limit_hit:
            break

    open_bounds = [item[0] for item in heap if not prunable(item[0])]
    if best_x is not None:
        open_bounds.append(best_obj)
    proven = min(open_bounds) if open_bounds else np.inf

    if limit_hit:
        return MipSolution(
            STATUS_LIMIT,
            best_x,
            None if best_x is None else float(sign * best_obj),
            float(sign * proven),
            nodes,
        )
    if best_x is None:
        return MipSolution(STATUS_INFEASIBLE, None, None, float(sign * proven), nodes)
    return MipSolution(
        STATUS_OPTIMAL, best_x, float(sign * best_obj), float(sign * best_obj), nodes
    )


def _fix(arr, j, value):
    arr[j] = value
    return arr


def resolve_with_fixed_binaries(
    prog: MixedBinaryProgram,
    x_binary,
    cfg: BnBConfig = DEFAULT_BNB,
):
    """Re-solve the LP with all binaries pinned to the given 0/1 values."""
    lo = [b[0] for b in prog.base.bounds]
    hi = [b[1] for b in prog.base.bounds]
    for j, v in zip(prog.binary_indices, x_binary):
        lo[j] = hi[j] = float(round(v))
    lp = LinearProgram(
        prog.base.objective,
        prog.base.constraint_matrix,
        prog.base.senses,
        prog.base.rhs,
        bounds=list(zip(lo, hi)),
        direction=prog.base.direction,
    )
    return solve_lp(lp, cfg.lp_tol, cfg.engine)
