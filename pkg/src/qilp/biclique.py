"""Decomposition algorithms for the facet-selection problem.

Rather than solving the full model in one shot, each observation gets a
small single-point subproblem whose optimal facet indicators become one row
of a binary observation-by-facet matrix.  An all-one submatrix of that
matrix with enough rows is exactly a feasible facet selection, so a clique
search over the matrix recovers a solution.  Sequential weight updates pull
the per-observation rows toward a consensus, and a cut pool over the first
observation's solutions enumerates alternative seeds, which makes the
search exact whenever the first observation is selected at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import parallel_map
from .bnb import BnBConfig, MixedBinaryProgram, solve_mip
from .errors import CertificationError, DimensionError
from .inverse import (
    QioConfig,
    check_inverse_feasible,
    facet_distance_matrix,
    quantile_count,
    reduced_big_m,
)
from .polytope import (
    Dataset,
    ForwardInstance,
    NORM_INF,
    min_face_distance,
    vector_norm,
)
from .simplex import DEFAULT_TOL, EQ, GE, LinearProgram, solve_lp

# Uniform bonus preferring denser indicator rows among weight ties, plus an
# index slope resolving remaining ties toward lower facet indexes.  Both must
# clear the LP optimality tolerance (1e-7) yet stay below the smallest
# meaningful weight difference (1/K after tally normalization), which holds
# at desk scale (K up to a few hundred).
TIE_BONUS = 1e-3
ALPHA_ZERO_TOL = 1e-7


def _per_element_slopes(m: int) -> np.ndarray:
    """Index tie-break slopes, each below TIE_BONUS/2, gaps above LP tolerance."""
    idx = np.arange(m, dtype=float)
    return 0.5 * TIE_BONUS * (m - idx) / (m + 1.0)


def _sum_bounded_slopes(m: int, total: float) -> np.ndarray:
    """Index slopes whose sum over any subset stays below `total`."""
    idx = np.arange(m, dtype=float)
    return total * (m - idx) / (m * (m + 1.0))


def order_dataset(data: Dataset, norm: str = NORM_INF) -> np.ndarray:
    """Stable ordering by total distance to the rest of the dataset.

    Points close to the bulk come first so the sequential weight updates
    start from consensual rows; ties keep the original order.
    """
    pts = data.points
    diff = pts[:, None, :] - pts[None, :, :]
    if norm == NORM_INF:
        dists = np.abs(diff).max(axis=2)
    else:
        dists = np.abs(diff).sum(axis=2)
    sums = dists.sum(axis=1)
    return np.argsort(sums, kind="stable")


@dataclass
class WeightVector:
    """Facet weights driven by a running tally of earlier indicator rows."""

    tally: np.ndarray

    @classmethod
    def ones(cls, m: int) -> "WeightVector":
        return cls(np.zeros(m))

    @property
    def w(self) -> np.ndarray:
        peak = self.tally.max() if self.tally.size else 0.0
        if peak <= 0:
            return np.ones_like(self.tally)
        return self.tally / peak

    def update(self, row: np.ndarray) -> None:
        self.tally = self.tally + row


@dataclass(frozen=True)
class BiAdjacency:
    """Binary observation-by-facet matrix with row provenance.

    ``row_order[r]`` is the original observation index behind matrix row r.
    Rows flagged in ``infeasible_rows`` are all-zero placeholders for
    observations that cannot reach the feasible set within tau.
    """

    entries: np.ndarray
    kind: str
    row_order: tuple
    row_errors: np.ndarray | None = None
    infeasible_rows: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.int8).copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "row_order", tuple(int(r) for r in self.row_order))
        if e.ndim != 2 or len(self.row_order) != e.shape[0]:
            raise DimensionError("row_order must name every matrix row")

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ReducedResult:
    feasible: bool
    v: np.ndarray
    eps: np.ndarray | None


def _candidate_facets(inst, point, tau, norm, tol, engine, distances_row=None):
    if distances_row is not None:
        return [
            i
            for i in inst.facet_indices
            if distances_row[i] <= tau + tol.tol_feas
        ]
    out = []
    for i in inst.facet_indices:
        d, _ = min_face_distance(inst, [i], point, norm, tol, engine)
        if d <= tau + tol.tol_feas:
            out.append(i)
    return out


def solve_reduced(
    inst: ForwardInstance,
    point,
    tau: float,
    weights: np.ndarray,
    cuts=(),
    norm: str = NORM_INF,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
    distances_row: np.ndarray | None = None,
) -> ReducedResult:
    """Best facet-indicator vector for a single observation.

    Maximizes the weighted indicator sum over perturbations of the point
    that stay within tau; a uniform bonus prefers denser rows among ties
    and a sub-quantum slope prefers lower facet indexes.  Cuts exclude
    previously seen indicator supports.
    """
    point = np.asarray(point, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape[0] != inst.m:
        raise DimensionError("one weight per constraint row required")
    bnb = bnb or BnBConfig(lp_tol=DEFAULT_TOL, engine=engine)
    tol = bnb.lp_tol
    cand = _candidate_facets(inst, point, tau, norm, tol, engine, distances_row)
    n, m = inst.n, inst.m
    if not cand:
        # No facet is in reach: the row is empty, but the point itself may
        # still sit within tau of the feasible set.
        d, w = min_face_distance(inst, (), point, norm, tol, engine)
        if d <= tau + tol.tol_feas:
            return ReducedResult(True, np.zeros(m, dtype=np.int8), point - w)
        return ReducedResult(False, np.zeros(m, dtype=np.int8), None)
    big_m = reduced_big_m(inst, point, tau)

    nV = len(cand)
    pos = {i: p for p, i in enumerate(cand)}
    width = n + nV  # eps block then indicator block
    rows, senses, rhs = [], [], []
    for i in range(m):
        base = np.zeros(width)
        base[:n] = -inst.A[i]
        b_i = inst.b[i] - float(inst.A[i] @ point)
        if inst.row_senses[i] == EQ:
            rows.append(base)
            senses.append(EQ)
            rhs.append(b_i)
            continue
        rows.append(base)
        senses.append(GE)
        rhs.append(b_i)
        if i in pos:
            up = np.zeros(width)
            up[:n] = inst.A[i]
            up[n + pos[i]] = -big_m
            rows.append(up)
            senses.append(GE)
            rhs.append(-b_i - big_m)
    if norm == NORM_INF:
        for j in range(n):
            for sgn in (1.0, -1.0):
                r = np.zeros(width)
                r[j] = sgn
                rows.append(r)
                senses.append(GE)
                rhs.append(-tau)
    else:
        # |eps|_1 <= tau via split variables appended on the right.
        width2 = width + 2 * n
        rows = [np.concatenate([r, np.zeros(2 * n)]) for r in rows]
        for j in range(n):
            r = np.zeros(width2)
            r[j] = 1.0
            r[width + j] = -1.0
            r[width + n + j] = 1.0
            rows.append(r)
            senses.append(EQ)
            rhs.append(0.0)
        r = np.zeros(width2)
        r[width:] = -1.0
        rows.append(r)
        senses.append(GE)
        rhs.append(-tau)
        width = width2
    for cut in cuts:
        cut = set(cut)
        r = np.zeros(width)
        hit = [n + pos[i] for i in cut if i in pos]
        if len(hit) < len(cut):
            # Indicators outside the candidate set are fixed at zero, so the
            # cut can never bind; skip it.
            continue
        for col in hit:
            r[col] = -1.0
        rows.append(r)
        senses.append(GE)
        rhs.append(-(len(cut) - 1.0))

    objective = np.zeros(width)
    slopes = _per_element_slopes(m)
    for i, p in pos.items():
        objective[n + p] = weights[i] + TIE_BONUS + slopes[i]

    bounds = [(None, None)] * width
    for p in range(nV):
        bounds[n + p] = (0.0, 1.0)
    if norm != NORM_INF:
        for j in range(width - 2 * n, width):
            bounds[j] = (0.0, None)

    prog = MixedBinaryProgram(
        LinearProgram(
            objective, np.array(rows), tuple(senses), np.array(rhs),
            bounds=bounds, direction="max",
        ),
        tuple(range(n, n + nV)),
    )
    result = solve_mip(prog, bnb)
    if result.status == "infeasible":
        return ReducedResult(False, np.zeros(m, dtype=np.int8), None)
    if result.status != "optimal":
        raise CertificationError("single-observation subproblem hit its limit")
    v = np.zeros(m, dtype=np.int8)
    for i, p in pos.items():
        v[i] = 1 if result.x[n + p] > 0.5 else 0
    eps = result.x[:n].copy()
    return ReducedResult(True, v, eps)


def build_dbar(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    weights_init: WeightVector | None = None,
    cuts=(),
    parallel_prefix: int | None = None,
    row_order=None,
    distances: np.ndarray | None = None,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
    threads: int = 1,
):
    """Build the observation-by-facet indicator matrix row by row.

    ``data`` must already be ordered (see :func:`order_dataset`);
    ``row_order`` records the original observation index per row.  The
    first ``parallel_prefix`` rows update the weights sequentially, the
    remaining rows reuse the frozen weights and may be solved on threads.
    Cuts apply to the first observation's subproblem only.
    """
    K = len(data)
    order = tuple(range(K)) if row_order is None else tuple(row_order)
    prefix = K if parallel_prefix is None else max(1, min(parallel_prefix, K))
    weights = weights_init or WeightVector.ones(inst.m)
    entries = np.zeros((K, inst.m), dtype=np.int8)
    errors = np.zeros((K, inst.n))
    flagged = []

    def run(k, w):
        return solve_reduced(
            inst,
            data.points[k],
            cfg.tau,
            w,
            cuts=cuts if k == 0 else (),
            norm=cfg.error_norm,
            bnb=bnb,
            engine=engine,
            distances_row=None if distances is None else distances[k],
        )

    for k in range(prefix):
        res = run(k, weights.w)
        if res.feasible:
            entries[k] = res.v
            errors[k] = res.eps
        else:
            flagged.append(k)
        weights.update(entries[k].astype(float))

    if prefix < K:
        frozen = weights.w.copy()
        results = parallel_map(
            lambda k: run(k, frozen), range(prefix, K), threads
        )
        for k, res in zip(range(prefix, K), results):
            if res.feasible:
                entries[k] = res.v
                errors[k] = res.eps
            else:
                flagged.append(k)
            weights.update(entries[k].astype(float))

    mat = BiAdjacency(entries, "Dbar", order, errors, tuple(sorted(flagged)))
    return mat, weights


@dataclass(frozen=True)
class CliqueResult:
    rows: tuple
    cols: tuple
    objective: int


def solve_clique(
    D: BiAdjacency,
    theta: float,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
) -> CliqueResult:
    """Largest-column all-one submatrix with at least ceil(theta*K) rows.

    Solved exactly as a binary program: a row and a column may both be
    selected only when their entry is one.  Returns matrix-row indexes and
    facet (column) indexes; an unusable matrix yields objective zero.
    """
    K, m = D.K, D.m
    entries = D.entries
    q = quantile_count(theta, K)
    col_has_one = entries.any(axis=0)
    active_cols = [int(i) for i in np.nonzero(col_has_one)[0]]
    nC = len(active_cols)
    width = nC + K  # column picks then row picks
    rows, senses, rhs = [], [], []
    for p, i in enumerate(active_cols):
        zero_rows = np.nonzero(entries[:, i] == 0)[0]
        for k in zero_rows:
            r = np.zeros(width)
            r[p] = -1.0
            r[nC + int(k)] = -1.0
            rows.append(r)
            senses.append(GE)
            rhs.append(-1.0)
    sel = np.zeros(width)
    sel[nC:] = 1.0
    rows.append(sel)
    senses.append(GE)
    rhs.append(float(q))

    objective = np.zeros(width)
    if nC:
        objective[:nC] = 1.0 + _sum_bounded_slopes(m, 0.8)[active_cols]
    bounds = [(0.0, 1.0)] * width
    cfg = bnb or BnBConfig(engine=engine)
    cfg = BnBConfig(
        tol_int=cfg.tol_int,
        gap=cfg.gap,
        node_limit=cfg.node_limit,
        time_limit=cfg.time_limit,
        lp_tol=cfg.lp_tol,
        engine=cfg.engine,
        improvement_floor=0.5,
    )
    prog = MixedBinaryProgram(
        LinearProgram(
            objective,
            np.array(rows) if rows else np.zeros((1, width)),
            tuple(senses) if rows else (GE,),
            np.array(rhs) if rows else np.array([0.0]),
            bounds=bounds,
            direction="max",
        ),
        tuple(range(width)),
    )
    result = solve_mip(prog, cfg)
    if result.status == "infeasible" or result.x is None:
        return CliqueResult((), (), 0)
    x = result.x
    cols = tuple(
        active_cols[p] for p in range(nC) if x[p] > 0.5
    )
    picked_rows = tuple(int(k) for k in range(K) if x[nC + k] > 0.5)
    if not cols:
        return CliqueResult((), (), 0)
    sub = entries[np.ix_(picked_rows, cols)]
    if not np.all(sub == 1):
        raise CertificationError("clique solver returned a non-all-one submatrix")
    if len(picked_rows) < q:
        raise CertificationError("clique solver selected too few rows")
    return CliqueResult(picked_rows, cols, len(cols))


@dataclass(frozen=True)
class AlgResult:
    """Outcome of a decomposition run.

    ``selected_observations`` are original dataset indexes.  The exactness
    condition holds when the first (most central) observation's row is part
    of the winning all-one submatrix.
    """

    objective: int
    facet_set: tuple
    selected_observations: tuple
    matrix: BiAdjacency
    iterations: int
    condition_u1_held: bool
    limit_hit: bool


def dbar_alg_exact(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    iteration_limit: int = 200,
    parallel_prefix: int | None = None,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
    threads: int = 1,
    distances: np.ndarray | None = None,
) -> AlgResult:
    """Seeded decomposition search, exact when the first row joins the clique.

    Each iteration rebuilds the indicator matrix with the first
    observation's previous supports excluded by cuts, solves the clique,
    and keeps the best; the loop stops when a new seed can no longer reach
    the incumbent objective.
    """
    order = order_dataset(data, cfg.error_norm)
    ordered = data.permuted(order)
    if distances is None:
        distances = facet_distance_matrix(
            inst, ordered, cfg.error_norm, cfg.tolerances, engine
        )
    else:
        distances = np.asarray(distances, dtype=float)[order]

    cuts: list = []
    best = None
    best_obj = -1
    condition = False
    iterations = 0
    limit_hit = False
    r = 0
    while True:
        if r >= iteration_limit:
            limit_hit = True
            break
        r += 1
        iterations = r
        mat, _ = build_dbar(
            inst, ordered, cfg,
            cuts=tuple(cuts),
            parallel_prefix=parallel_prefix,
            row_order=tuple(int(i) for i in order),
            distances=distances,
            bnb=bnb,
            engine=engine,
            threads=threads,
        )
        row1_infeasible = 0 in mat.infeasible_rows
        if row1_infeasible and r > 1:
            break  # cuts exhausted the seed space
        clique = solve_clique(mat, cfg.theta, bnb, engine)
        if clique.objective > best_obj:
            best_obj = clique.objective
            best = (mat, clique)
            condition = 0 in clique.rows
        seed = frozenset(int(i) for i in np.nonzero(mat.entries[0])[0])
        if not seed:
            break
        cuts.append(seed)
        if len(seed) < best_obj:
            break
    if best is None:
        empty = BiAdjacency(
            np.zeros((len(data), inst.m), dtype=np.int8),
            "Dbar",
            tuple(int(i) for i in order),
        )
        return AlgResult(0, (), (), empty, iterations, False, limit_hit)
    mat, clique = best
    selected = tuple(sorted(mat.row_order[k] for k in clique.rows))
    return AlgResult(
        max(best_obj, 0),
        clique.cols,
        selected,
        mat,
        iterations,
        condition,
        limit_hit,
    )


def dbar_alg_heuristic(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    parallel_prefix: int | None = None,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
    threads: int = 1,
    distances: np.ndarray | None = None,
) -> AlgResult:
    """Single-seed pass: one indicator matrix, one clique solve."""
    return dbar_alg_exact(
        inst, data, cfg,
        iteration_limit=1,
        parallel_prefix=parallel_prefix,
        bnb=bnb,
        engine=engine,
        threads=threads,
        distances=distances,
    )


def _alpha_lp(inst, point, tau, weights, norm):
    """Weighted slack-activation LP for one observation.

    Activation alpha_i scales the slack allowance of row i; a zero
    activation certifies the row can be made tight within tau.
    """
    n, m = inst.n, inst.m
    point = np.asarray(point, dtype=float).ravel()
    big_m = reduced_big_m(inst, point, tau)
    facets = inst.facet_indices
    pos = {i: p for p, i in enumerate(facets)}
    nA = len(facets)
    extra = 2 * n if norm != NORM_INF else 0
    width = n + nA + extra
    rows, senses, rhs = [], [], []
    for i in range(m):
        base = np.zeros(width)
        base[:n] = -inst.A[i]
        b_i = inst.b[i] - float(inst.A[i] @ point)
        if inst.row_senses[i] == EQ:
            rows.append(base)
            senses.append(EQ)
            rhs.append(b_i)
            continue
        rows.append(base)
        senses.append(GE)
        rhs.append(b_i)
        up = np.zeros(width)
        up[:n] = inst.A[i]
        up[n + pos[i]] = big_m
        rows.append(up)
        senses.append(GE)
        rhs.append(-b_i)
    if norm == NORM_INF:
        for j in range(n):
            for sgn in (1.0, -1.0):
                r = np.zeros(width)
                r[j] = sgn
                rows.append(r)
                senses.append(GE)
                rhs.append(-tau)
    else:
        off = n + nA
        for j in range(n):
            r = np.zeros(width)
            r[j] = 1.0
            r[off + j] = -1.0
            r[off + n + j] = 1.0
            rows.append(r)
            senses.append(EQ)
            rhs.append(0.0)
        r = np.zeros(width)
        r[off:] = -1.0
        rows.append(r)
        senses.append(GE)
        rhs.append(-tau)

    objective = np.zeros(width)
    slopes = _per_element_slopes(m)
    for i, p in pos.items():
        objective[n + p] = weights[i] + TIE_BONUS + slopes[i]
    bounds = [(None, None)] * width
    for j in range(n, width):
        bounds[j] = (0.0, None)
    return (
        LinearProgram(
            objective, np.array(rows), tuple(senses), np.array(rhs),
            bounds=bounds, direction="min",
        ),
        facets,
    )


def dtilde_alg_heuristic(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
) -> AlgResult:
    """LP-relaxation variant: indicator rows from zero slack activations.

    Solves one weighted LP per observation instead of a binary subproblem;
    rows mark facets whose activation came out (numerically) zero.  The
    winning facet set is re-certified before being reported.
    """
    order = order_dataset(data, cfg.error_norm)
    ordered = data.permuted(order)
    K = len(data)
    weights = WeightVector.ones(inst.m)
    entries = np.zeros((K, inst.m), dtype=np.int8)
    flagged = []
    tol = cfg.tolerances
    for k in range(K):
        lp, facets = _alpha_lp(
            inst, ordered.points[k], cfg.tau, weights.w, cfg.error_norm
        )
        sol = solve_lp(lp, tol, engine)
        if sol.status == "infeasible":
            flagged.append(k)
        elif sol.status != "optimal":
            raise CertificationError(f"activation LP came back {sol.status}")
        else:
            alpha = sol.x[inst.n : inst.n + len(facets)]
            for p, i in enumerate(facets):
                entries[k, i] = 1 if alpha[p] <= ALPHA_ZERO_TOL else 0
        weights.update(entries[k].astype(float))
    mat = BiAdjacency(
        entries, "Dtilde", tuple(int(i) for i in order), None, tuple(flagged)
    )
    clique = solve_clique(mat, cfg.theta, bnb, engine)
    if clique.objective == 0:
        return AlgResult(0, (), (), mat, 1, False, False)
    check = check_inverse_feasible(inst, data, cfg, clique.cols, engine)
    if not check.feasible:
        raise CertificationError(
            "activation-based facet set failed re-certification"
        )
    selected = tuple(sorted(mat.row_order[k] for k in clique.rows))
    return AlgResult(
        clique.objective,
        clique.cols,
        selected,
        mat,
        1,
        0 in clique.rows,
        False,
    )
