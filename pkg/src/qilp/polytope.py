"""Forward problem model: normalized constraint systems and their geometry.

A :class:`ForwardInstance` is the polyhedron ``X = {x | a_i.x >= b_i}`` (with
optional native equality rows) whose cost vector is being inferred.  Rows are
normalized so each inequality row has unit p-norm; the part of ``X`` where
row ``i`` is tight is that row's facet region.

All distance subroutines reduce to LPs on the instance and share the LP
kernel in :mod:`qilp.simplex`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, UnboundedProblemError
from .simplex import (
    DEFAULT_TOL,
    EQ,
    GE,
    LinearProgram,
    LpSolution,
    SolverTolerances,
    solve_lp,
)

NORM_INF = "inf"
NORM_L1 = "l1"


def _check_norm(norm: str) -> str:
    if norm not in (NORM_INF, NORM_L1):
        raise ValueError(f"norm must be 'inf' or 'l1', got {norm!r}")
    return norm


def vector_norm(v: np.ndarray, norm: str) -> float:
    _check_norm(norm)
    v = np.asarray(v, dtype=float)
    return float(np.abs(v).max()) if norm == NORM_INF else float(np.abs(v).sum())


def row_norm(row: np.ndarray, p: float) -> float:
    if p == 1:
        return float(np.abs(row).sum())
    if p == 2:
        return float(np.sqrt((row * row).sum()))
    if math.isinf(p):
        return float(np.abs(row).max())
    raise ValueError(f"normalization p must be 1, 2 or inf, got {p!r}")


@dataclass(frozen=True)
class ForwardInstance:
    """A normalized constraint system ``A x (>=|=) b`` defining a bounded polyhedron.

    Attributes:
        A: (m, n) matrix with every inequality row scaled to unit p-norm.
        b: length-m right-hand side, scaled together with its row.
        row_senses: per-row ``">="`` or ``"=="``; inequality rows are the facets.
        name: label used in files and reports.
        normalization_p: the p used for row scaling (1, 2 or inf).
        full_dimensional: False when the instance encodes equalities as
            opposing inequality pairs, which leaves ``X`` flat.
    """

    A: np.ndarray
    b: np.ndarray
    row_senses: tuple
    name: str = "instance"
    normalization_p: float = 2.0
    full_dimensional: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)).copy()
        b = np.asarray(self.b, dtype=float).ravel().copy()
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "row_senses", tuple(self.row_senses))
        if A.shape[0] != b.shape[0] or A.shape[0] != len(self.row_senses):
            raise DimensionError("A, b and row_senses must agree on the row count")
        for s in self.row_senses:
            if s not in (GE, EQ):
                raise DimensionError(f"row sense must be '>=' or '==', got {s!r}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def facet_indices(self) -> tuple:
        return tuple(i for i, s in enumerate(self.row_senses) if s == GE)

    def membership_lp_rows(self):
        """(matrix, senses, rhs) encoding x in X, reusable as LP blocks."""
        return self.A, self.row_senses, self.b


@dataclass(frozen=True)
class Dataset:
    """Observed decision vectors, optionally tagged with a batch/time label."""

    points: np.ndarray
    tags: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float)).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.tags is not None:
            tags = np.asarray(self.tags, dtype=np.int64).copy()
            if tags.shape[0] != pts.shape[0]:
                raise DimensionError("one tag per point required")
            tags.setflags(write=False)
            object.__setattr__(self, "tags", tags)
        if pts.shape[0] < 1:
            raise DimensionError("a dataset needs at least one point")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def permuted(self, order) -> "Dataset":
        order = np.asarray(order, dtype=np.int64)
        tags = None if self.tags is None else self.tags[order]
        return Dataset(self.points[order], tags)


def normalize_instance(
    A,
    b,
    p: float = 2.0,
    senses=None,
    name: str = "instance",
    full_dimensional: bool = True,
    validate: bool = True,
    tol: SolverTolerances = DEFAULT_TOL,
) -> ForwardInstance:
    """Scale every row (and its rhs) to unit p-norm and wrap as an instance.

    Raises on all-zero rows.  With ``validate`` the polyhedron is also
    checked nonempty and bounded by probing the origin's maximum distance.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if senses is None:
        senses = (GE,) * A.shape[0]
    scaled_A = np.empty_like(A)
    scaled_b = np.empty_like(b)
    for i in range(A.shape[0]):
        nrm = row_norm(A[i], p)
        if nrm <= 0.0:
            raise DimensionError(f"row {i} is all zeros and cannot be normalized")
        scaled_A[i] = A[i] / nrm
        scaled_b[i] = b[i] / nrm
    inst = ForwardInstance(
        scaled_A, scaled_b, tuple(senses), name, float(p), full_dimensional
    )
    if validate:
        max_point_distance(inst, np.zeros(inst.n), tol=tol)
    return inst


@dataclass(frozen=True)
class ForwardResult:
    """Outcome of minimizing a cost vector over an instance.

    The optimal face is ``X`` intersected with ``cost @ x == value``; it is
    reported by that added row rather than by enumeration.
    """

    x: np.ndarray
    value: float
    cost: np.ndarray
    active_rows: tuple


def _membership_lp(inst, extra_rows=None, extra_senses=None, extra_rhs=None,
                   objective=None, n_extra_vars=0, direction="min"):
    """Assemble an LP over X with optional extra rows/variables appended."""
    n = inst.n
    width = n + n_extra_vars
    base = np.zeros((inst.m, width))
    base[:, :n] = inst.A
    rows = [base]
    senses = list(inst.row_senses)
    rhs = [inst.b]
    if extra_rows is not None:
        extra = np.atleast_2d(np.asarray(extra_rows, dtype=float))
        rows.append(extra)
        senses.extend(extra_senses)
        rhs.append(np.asarray(extra_rhs, dtype=float).ravel())
    matrix = np.vstack(rows)
    if objective is None:
        objective = np.zeros(width)
    return LinearProgram(
        objective,
        matrix,
        tuple(senses),
        np.concatenate(rhs),
        bounds=[(None, None)] * width,
        direction=direction,
    )


def solve_forward(
    inst: ForwardInstance,
    c,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> ForwardResult:
    """Minimize ``c @ x`` over the instance and describe the optimal face."""
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != inst.n:
        raise DimensionError("cost vector length must match the variable count")
    lp = _membership_lp(inst, objective=c)
    sol = solve_lp(lp, tol, engine)
    if sol.status == "unbounded":
        raise UnboundedProblemError(
            "forward problem is unbounded; the instance violates the bounded-X assumption"
        )
    if sol.status != "optimal":
        raise UnboundedProblemError(f"forward problem is {sol.status}")
    resid = inst.A @ sol.x - inst.b
    active = tuple(
        int(i) for i in range(inst.m) if abs(resid[i]) <= 10 * tol.tol_feas
    )
    return ForwardResult(sol.x, float(sol.objective_value), c, active)


def _distance_lp(inst, tight_rows, point, norm, objective_only_distance=True):
    """LP computing min-norm perturbation of `point` onto X with rows tight.

    Variables are [x, t] for the max norm and [x, u, v] (u - v = point - x)
    for the l1 norm.
    """
    n = inst.n
    point = np.asarray(point, dtype=float).ravel()
    tight = list(tight_rows)
    if norm == NORM_INF:
        width = n + 1
        extra_rows = []
        extra_senses = []
        extra_rhs = []
        for i in tight:
            row = np.zeros(width)
            row[:n] = inst.A[i]
            extra_rows.append(row)
            extra_senses.append(EQ)
            extra_rhs.append(inst.b[i])
        for j in range(n):
            up = np.zeros(width)
            up[j] = 1.0
            up[n] = 1.0
            extra_rows.append(up)  # x_j + t >= p_j
            extra_senses.append(GE)
            extra_rhs.append(point[j])
            dn = np.zeros(width)
            dn[j] = -1.0
            dn[n] = 1.0
            extra_rows.append(dn)  # t - x_j >= -p_j
            extra_senses.append(GE)
            extra_rhs.append(-point[j])
        obj = np.zeros(width)
        obj[n] = 1.0
        lp = _membership_lp(
            inst, extra_rows, extra_senses, extra_rhs, obj, n_extra_vars=1
        )
        lp.bounds[n] = (0.0, None)
        return lp
    # l1: split the deviation into nonnegative parts.
    width = n + 2 * n
    extra_rows = []
    extra_senses = []
    extra_rhs = []
    for i in tight:
        row = np.zeros(width)
        row[:n] = inst.A[i]
        extra_rows.append(row)
        extra_senses.append(EQ)
        extra_rhs.append(inst.b[i])
    for j in range(n):
        row = np.zeros(width)
        row[j] = 1.0
        row[n + j] = 1.0
        row[n + n + j] = -1.0
        extra_rows.append(row)  # x_j + u_j - v_j = p_j
        extra_senses.append(EQ)
        extra_rhs.append(point[j])
    obj = np.zeros(width)
    obj[n:] = 1.0
    lp = _membership_lp(
        inst, extra_rows, extra_senses, extra_rhs, obj, n_extra_vars=2 * n
    )
    for j in range(n, width):
        lp.bounds[j] = (0.0, None)
    return lp


def min_face_distance(
    inst: ForwardInstance,
    tight_rows,
    point,
    norm: str = NORM_INF,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
):
    """Minimum distance from `point` to X with the given rows tight.

    Returns ``(distance, witness)``; an empty region reports ``(inf, None)``.
    """
    _check_norm(norm)
    lp = _distance_lp(inst, tight_rows, point, norm)
    sol = solve_lp(lp, tol, engine)
    if sol.status == "infeasible":
        return math.inf, None
    if sol.status != "optimal":
        raise UnboundedProblemError(f"distance LP is {sol.status}")
    return float(sol.objective_value), sol.x[: inst.n].copy()


def min_facet_distance(
    inst: ForwardInstance,
    facet: int,
    point,
    norm: str = NORM_INF,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
):
    """Distance from `point` to facet region ``X_i``, with a witness."""
    if facet < 0 or facet >= inst.m:
        raise DimensionError(f"facet index {facet} out of range")
    return min_face_distance(inst, [facet], point, norm, tol, engine)


def coordinate_ranges(
    inst: ForwardInstance,
    tight_rows=(),
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
):
    """Per-coordinate (min, max) over X (optionally with rows held tight).

    2n LPs.  Raises if the region is unbounded; returns None if empty.
    """
    n = inst.n
    lows = np.empty(n)
    highs = np.empty(n)
    tight = list(tight_rows)
    extra = None
    senses = None
    rhs = None
    if tight:
        extra = inst.A[tight]
        senses = [EQ] * len(tight)
        rhs = inst.b[tight]
    for j in range(n):
        obj = np.zeros(n)
        obj[j] = 1.0
        for direction, store in (("min", lows), ("max", highs)):
            lp = _membership_lp(inst, extra, senses, rhs, obj, direction=direction)
            sol = solve_lp(lp, tol, engine)
            if sol.status == "infeasible":
                return None
            if sol.status == "unbounded":
                raise UnboundedProblemError(
                    f"coordinate {j} is unbounded over the requested region"
                )
            store[j] = sol.objective_value
    return lows, highs


def max_point_distance(
    inst: ForwardInstance,
    point,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> float:
    """Largest max-norm distance from `point` to any x in X, via 2n LPs."""
    point = np.asarray(point, dtype=float).ravel()
    ranges = coordinate_ranges(inst, (), tol, engine)
    if ranges is None:
        raise UnboundedProblemError("the polyhedron is empty")
    lows, highs = ranges
    return float(np.maximum(highs - point, point - lows).max())


def face_max_distance(
    inst: ForwardInstance,
    c,
    point,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> float:
    """Largest max-norm distance from `point` to the optimal face of FO(c)."""
    point = np.asarray(point, dtype=float).ravel()
    fwd = solve_forward(inst, c, tol, engine)
    n = inst.n
    lows = np.empty(n)
    highs = np.empty(n)
    face_row = np.asarray(fwd.cost, dtype=float)
    for j in range(n):
        obj = np.zeros(n)
        obj[j] = 1.0
        for direction, store in (("min", lows), ("max", highs)):
            lp = _membership_lp(
                inst, face_row, [EQ], [fwd.value], obj, direction=direction
            )
            sol = solve_lp(lp, tol, engine)
            if sol.status != "optimal":
                raise UnboundedProblemError(
                    f"optimal-face LP is {sol.status}; face should be nonempty and bounded"
                )
            store[j] = sol.objective_value
    return float(np.maximum(highs - point, point - lows).max())


def facet_diameter(
    inst: ForwardInstance,
    facet: int,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> float:
    """Exact max-norm diameter of a facet region, via its coordinate ranges."""
    ranges = coordinate_ranges(inst, [facet], tol, engine)
    if ranges is None:
        return 0.0
    lows, highs = ranges
    return float((highs - lows).max())
