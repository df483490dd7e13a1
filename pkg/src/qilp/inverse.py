"""Inverse model core: error thresholds, big-M bounds, the facet-wise
baseline, and the facet-selection MIP with its certificates.

The central object is the mixed-binary model built by :func:`build_mqio`:
binary ``v_i`` marks facet ``i`` as jointly tight for every observation's
perturbed image, binary ``u_k`` marks observation ``k`` as one of the at
least ``ceil(theta*K)`` points whose perturbation must stay within the
error threshold ``tau``.  Maximizing ``sum(v)`` yields the largest facet
set whose cone consists of inverse-feasible cost vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bnb import BnBConfig, DEFAULT_BNB, MipSolution, MixedBinaryProgram, solve_mip
from .errors import (
    CertificationError,
    DimensionError,
    InverseInfeasibleError,
    IterationLimitError,
)
from .polytope import (
    Dataset,
    ForwardInstance,
    NORM_INF,
    NORM_L1,
    coordinate_ranges,
    min_face_distance,
    min_facet_distance,
    row_norm,
    vector_norm,
)
from .simplex import DEFAULT_TOL, EQ, GE, LinearProgram, SolverTolerances


def _as_fraction(theta: float) -> Fraction:
    return Fraction(theta).limit_denominator(10**9)


def quantile_count(theta: float, K: int) -> int:
    """ceil(theta*K) with an exact rational ceiling."""
    q = _as_fraction(theta) * K
    return int(math.ceil(q)) if q.denominator != 1 else int(q)


def shift_count(theta: float, K: int) -> int:
    """floor((1-theta)*K) + 1 with an exact rational floor."""
    r = (1 - _as_fraction(theta)) * K
    return int(r.numerator // r.denominator) + 1


@dataclass(frozen=True)
class QioConfig:
    """Model parameters: threshold, quantile level and norms."""

    tau: float
    theta: float
    error_norm: str = NORM_INF
    normalization_p: float = 2.0
    tolerances: SolverTolerances = DEFAULT_TOL

    def __post_init__(self):
        if self.tau < 0:
            raise DimensionError("tau must be nonnegative")
        if not (0 < self.theta <= 1):
            raise DimensionError("theta must lie in (0, 1]")
        if self.error_norm not in (NORM_INF, NORM_L1):
            raise DimensionError("error_norm must be 'inf' or 'l1'")

    def selection_count(self, K: int) -> int:
        return quantile_count(self.theta, K)


# ---------------------------------------------------------------------------
# Big-M bounds


@dataclass(frozen=True)
class BigMParams:
    """Deactivation constants for the facet-selection MIP.

    ``M1[i, k]`` bounds the slack of row i at any reachable image of point k
    (Cauchy-Schwarz/Minkowski bound); ``M2[k]`` is the largest max-norm
    distance from point k to the feasible set.
    """

    M1: np.ndarray
    M2: np.ndarray

    def scaled(self, factor: float) -> "BigMParams":
        return BigMParams(self.M1 * factor, self.M2 * factor)


def max_point_distances(
    inst: ForwardInstance,
    data: Dataset,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> np.ndarray:
    """d_k = max-norm distance from each point to the farthest x in X."""
    ranges = coordinate_ranges(inst, (), tol, engine)
    if ranges is None:
        raise InverseInfeasibleError("the feasible set is empty")
    lows, highs = ranges
    pts = data.points
    return np.maximum(highs[None, :] - pts, pts - lows[None, :]).max(axis=1)


def compute_big_m(
    inst: ForwardInstance,
    data: Dataset,
    tau: float,
    per_point_rhs: np.ndarray | None = None,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> BigMParams:
    """Valid (for any tau >= 0) big-M constants for the full model."""
    pts = data.points
    K = len(data)
    if per_point_rhs is None:
        d = max_point_distances(inst, data, tol, engine)
        b = np.broadcast_to(inst.b[:, None], (inst.m, K))
    else:
        per_point_rhs = np.asarray(per_point_rhs, dtype=float)
        if per_point_rhs.shape != (K, inst.m):
            raise DimensionError("per_point_rhs must be (K, m)")
        d = np.empty(K)
        for k in range(K):
            shifted = ForwardInstance(
                inst.A, per_point_rhs[k], inst.row_senses,
                inst.name, inst.normalization_p, inst.full_dimensional,
            )
            d[k] = max_point_distances(
                shifted, Dataset(pts[k : k + 1]), tol, engine
            )[0]
        b = per_point_rhs.T
    row_l2 = np.sqrt((inst.A * inst.A).sum(axis=1))
    point_l2 = np.sqrt((pts * pts).sum(axis=1))
    root_n = math.sqrt(inst.n)
    M1 = row_l2[:, None] * (point_l2[None, :] + root_n * d[None, :]) - b
    return BigMParams(np.maximum(M1, 1e-9), np.maximum(d, 1e-9))


def reduced_big_m(inst: ForwardInstance, point, tau: float) -> float:
    """Scalar deactivation constant for the single-observation problem."""
    point = np.asarray(point, dtype=float).ravel()
    row_l2 = np.sqrt((inst.A * inst.A).sum(axis=1)).max()
    val = row_l2 * (
        math.sqrt(float(point @ point)) + tau * math.sqrt(inst.n)
    ) + float((-inst.b).max())
    return max(val, 1e-9)


# ---------------------------------------------------------------------------
# Facet distance table and the facet-wise procedures


def facet_distance_matrix(
    inst: ForwardInstance,
    data: Dataset,
    norm: str = NORM_INF,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> np.ndarray:
    """(K, m) matrix of point-to-facet-region distances (inf where empty)."""
    K = len(data)
    out = np.full((K, inst.m), np.inf)
    for i in inst.facet_indices:
        for k in range(K):
            out[k, i] = min_facet_distance(
                inst, i, data.points[k], norm, tol, engine
            )[0]
    return out


def feasible_facets(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    distances: np.ndarray | None = None,
    engine: str = "auto",
):
    """Facets that alone cover at least ceil(theta*K) points within tau.

    Returns the sorted facet index list and a per-facet map of covered
    observation index sets.
    """
    if distances is None:
        distances = facet_distance_matrix(
            inst, data, cfg.error_norm, cfg.tolerances, engine
        )
    q = cfg.selection_count(len(data))
    slack = cfg.tolerances.tol_feas
    feasible = []
    covered = {}
    for i in inst.facet_indices:
        hits = frozenset(
            int(k) for k in np.nonzero(distances[:, i] <= cfg.tau + slack)[0]
        )
        covered[i] = hits
        if len(hits) >= q:
            feasible.append(i)
    return tuple(feasible), covered


@dataclass(frozen=True)
class MinTauResult:
    tau_star: float
    facet: int
    per_facet: np.ndarray


def min_tau(
    inst: ForwardInstance,
    data: Dataset,
    theta: float,
    norm: str = NORM_INF,
    distances: np.ndarray | None = None,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> MinTauResult:
    """Smallest threshold keeping the model feasible, found facet by facet.

    For each facet the ceil(theta*K)-th smallest point distance is the
    facet's own minimum; the overall minimum (lowest facet index on ties)
    is the answer.
    """
    if distances is None:
        distances = facet_distance_matrix(inst, data, norm, tol, engine)
    q = quantile_count(theta, len(data))
    per_facet = np.full(inst.m, np.inf)
    for i in inst.facet_indices:
        col = np.sort(distances[:, i])
        per_facet[i] = col[q - 1]
    facet = int(np.argmin(per_facet))
    return MinTauResult(float(per_facet[facet]), facet, per_facet)


@dataclass(frozen=True)
class PreviousModelResult:
    """Facet-enumeration fit minimizing the plain sum of optimality errors."""

    facet: int
    cost: np.ndarray
    objective: float
    errors: np.ndarray
    per_facet_objectives: np.ndarray


def solve_previous_model(
    inst: ForwardInstance,
    data: Dataset,
    error_norm: str = NORM_INF,
    tol: SolverTolerances = DEFAULT_TOL,
    engine: str = "auto",
) -> PreviousModelResult:
    """Baseline inverse fit: the best single facet under the error sum.

    An optimal cost vector is orthogonal to one of the defining rows, so
    scoring each facet by the sum of point distances and keeping the
    minimizer (lowest index on ties) solves the model exactly.
    """
    K = len(data)
    per_facet = np.full(inst.m, np.inf)
    witnesses = {}
    for i in inst.facet_indices:
        total = 0.0
        wit = np.empty_like(data.points)
        for k in range(K):
            d, w = min_facet_distance(
                inst, i, data.points[k], error_norm, tol, engine
            )
            if not math.isfinite(d):
                total = np.inf
                break
            total += d
            wit[k] = w
        per_facet[i] = total
        if math.isfinite(total):
            witnesses[i] = wit
    best = int(np.argmin(per_facet))
    errors = data.points - witnesses[best]
    return PreviousModelResult(
        best, inst.A[best].copy(), float(per_facet[best]), errors, per_facet
    )


# ---------------------------------------------------------------------------
# The facet-selection MIP


@dataclass
class MqioOptions:
    """Optional model extensions.

    per_point_rhs: (K, m) right-hand side per observation.
    cost_constraints: (D, d) restricting the representative cost to D c <= d,
        which adds cone-weight variables tied to the facet binaries.
    per_point_tau: per-observation error thresholds.
    restrict_facets: explicit facet candidate list (defaults to the
        single-facet feasibility screen).
    pin_selection_count: force sum(u) == ceil(theta*K) instead of >=.
    max_facets: cap sum(v) <= h.
    """

    per_point_rhs: np.ndarray | None = None
    cost_constraints: tuple | None = None
    per_point_tau: np.ndarray | None = None
    restrict_facets: tuple | None = None
    pin_selection_count: bool = False
    max_facets: int | None = None


@dataclass(frozen=True)
class MqioLayout:
    """Variable indexing of the built model."""

    n: int
    K: int
    facets: tuple
    error_norm: str
    has_cost_block: bool

    @property
    def n_aux(self) -> int:
        return self.K if self.error_norm == NORM_INF else 2 * self.n * self.K

    @property
    def v_offset(self) -> int:
        return self.n * self.K + self.n_aux

    @property
    def u_offset(self) -> int:
        return self.v_offset + len(self.facets)

    @property
    def lam_offset(self) -> int:
        return self.u_offset + self.K

    @property
    def c_offset(self) -> int:
        return self.lam_offset + len(self.facets)

    @property
    def n_vars(self) -> int:
        base = self.u_offset + self.K
        if self.has_cost_block:
            base += len(self.facets) + self.n
        return base

    def eps_slice(self, k: int) -> slice:
        return slice(k * self.n, (k + 1) * self.n)

    def t_index(self, k: int) -> int:
        return self.n * self.K + k

    def pl_slice(self, k: int) -> slice:
        off = self.n * self.K
        return slice(off + 2 * k * self.n, off + (2 * k + 1) * self.n)

    def mn_slice(self, k: int) -> slice:
        off = self.n * self.K
        return slice(off + (2 * k + 1) * self.n, off + (2 * k + 2) * self.n)

    def v_index(self, pos: int) -> int:
        return self.v_offset + pos

    def u_index(self, k: int) -> int:
        return self.u_offset + k


def mqio_layout(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    options: MqioOptions | None = None,
) -> MqioLayout:
    options = options or MqioOptions()
    facets = (
        tuple(options.restrict_facets)
        if options.restrict_facets is not None
        else inst.facet_indices
    )
    return MqioLayout(
        inst.n, len(data), facets, cfg.error_norm,
        options.cost_constraints is not None,
    )


def build_mqio(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    big_m: BigMParams,
    options: MqioOptions | None = None,
) -> MixedBinaryProgram:
    """Assemble the facet-selection MIP (objective: maximize sum of v)."""
    options = options or MqioOptions()
    lay = mqio_layout(inst, data, cfg, options)
    n, K, m = inst.n, len(data), inst.m
    facets = lay.facets
    nA = len(facets)
    pts = data.points
    if options.per_point_rhs is not None:
        rhs_per_point = np.asarray(options.per_point_rhs, dtype=float)
    else:
        rhs_per_point = np.broadcast_to(inst.b, (K, m))
    taus = (
        np.full(K, cfg.tau)
        if options.per_point_tau is None
        else np.asarray(options.per_point_tau, dtype=float)
    )
    facet_pos = {i: pos for pos, i in enumerate(facets)}

    width = lay.n_vars
    rows, senses, rhs = [], [], []

    def add_row(row, sense, b_val):
        rows.append(row)
        senses.append(sense)
        rhs.append(b_val)

    for k in range(K):
        es = lay.eps_slice(k)
        for i in range(m):
            base = np.zeros(width)
            base[es] = -inst.A[i]
            b_ik = rhs_per_point[k, i] - float(inst.A[i] @ pts[k])
            if inst.row_senses[i] == EQ:
                add_row(base, EQ, b_ik)
                continue
            add_row(base, GE, b_ik)
            if i in facet_pos:
                up = np.zeros(width)
                up[es] = inst.A[i]
                up[lay.v_index(facet_pos[i])] = -big_m.M1[i, k]
                add_row(up, GE, -b_ik - big_m.M1[i, k])

    if cfg.error_norm == NORM_INF:
        for k in range(K):
            es, ti = lay.eps_slice(k), lay.t_index(k)
            for j in range(n):
                r1 = np.zeros(width)
                r1[ti] = 1.0
                r1[es.start + j] = -1.0
                add_row(r1, GE, 0.0)
                r2 = np.zeros(width)
                r2[ti] = 1.0
                r2[es.start + j] = 1.0
                add_row(r2, GE, 0.0)
            link = np.zeros(width)
            link[ti] = -1.0
            link[lay.u_index(k)] = -big_m.M2[k]
            add_row(link, GE, -taus[k] - big_m.M2[k])
    else:
        for k in range(K):
            es, pl, mn = lay.eps_slice(k), lay.pl_slice(k), lay.mn_slice(k)
            for j in range(n):
                r = np.zeros(width)
                r[es.start + j] = 1.0
                r[pl.start + j] = -1.0
                r[mn.start + j] = 1.0
                add_row(r, EQ, 0.0)
            m2 = n * big_m.M2[k]  # l1 norm can be n times the max norm
            link = np.zeros(width)
            link[pl] = -1.0
            link[mn] = -1.0
            link[lay.u_index(k)] = -m2
            add_row(link, GE, -taus[k] - m2)

    sel = np.zeros(width)
    sel[lay.u_offset : lay.u_offset + K] = 1.0
    q = cfg.selection_count(K)
    add_row(sel, EQ if options.pin_selection_count else GE, float(q))

    if options.max_facets is not None:
        cap = np.zeros(width)
        cap[lay.v_offset : lay.v_offset + nA] = -1.0
        add_row(cap, GE, -float(options.max_facets))

    if options.cost_constraints is not None:
        D, dvec = options.cost_constraints
        D = np.atleast_2d(np.asarray(D, dtype=float))
        dvec = np.asarray(dvec, dtype=float).ravel()
        for j in range(n):
            r = np.zeros(width)
            r[lay.c_offset + j] = 1.0
            for pos, i in enumerate(facets):
                r[lay.lam_offset + pos] = -inst.A[i, j]
            add_row(r, EQ, 0.0)
        for pos in range(nA):
            r = np.zeros(width)
            r[lay.v_index(pos)] = 1.0
            r[lay.lam_offset + pos] = -1.0
            add_row(r, GE, 0.0)
        for t in range(D.shape[0]):
            r = np.zeros(width)
            r[lay.c_offset : lay.c_offset + n] = -D[t]
            add_row(r, GE, -dvec[t])

    objective = np.zeros(width)
    objective[lay.v_offset : lay.v_offset + nA] = 1.0

    bounds: list = [(None, None)] * width
    if cfg.error_norm == NORM_INF:
        for k in range(K):
            bounds[lay.t_index(k)] = (0.0, None)
    else:
        for k in range(K):
            for j in range(n):
                bounds[lay.pl_slice(k).start + j] = (0.0, None)
                bounds[lay.mn_slice(k).start + j] = (0.0, None)
    binaries = []
    for pos in range(nA):
        bounds[lay.v_index(pos)] = (0.0, 1.0)
        binaries.append(lay.v_index(pos))
    for k in range(K):
        bounds[lay.u_index(k)] = (0.0, 1.0)
        binaries.append(lay.u_index(k))
    if lay.has_cost_block:
        for pos in range(nA):
            bounds[lay.lam_offset + pos] = (0.0, None)

    lp = LinearProgram(
        objective,
        np.array(rows),
        tuple(senses),
        np.array(rhs),
        bounds=bounds,
        direction="max",
    )
    return MixedBinaryProgram(lp, tuple(binaries))


# ---------------------------------------------------------------------------
# Solutions and certificates


@dataclass(frozen=True)
class InverseSolution:
    """A certified inverse fit.

    ``representative_c`` is the unit-p-norm uniform strict conic combination
    of the selected facet rows; ``dual_certificate`` is the matching
    nonnegative multiplier vector over all rows (support on the selection).
    """

    selected_facets: tuple
    selected_points: tuple
    errors: dict
    cone_weights: dict
    representative_c: np.ndarray
    dual_certificate: np.ndarray
    objective: int


@dataclass(frozen=True)
class CheckResult:
    feasible: bool
    count: int
    witnesses: dict
    reason: str = ""


def check_inverse_feasible(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    facet_set,
    engine: str = "auto",
) -> CheckResult:
    """Certify a facet set: enough points must reach its joint tight region.

    Observation k passes when some x in X, tight on every chosen facet,
    lies within tau of it; the set is feasible when at least
    ceil(theta*K) observations pass.
    """
    facet_set = tuple(sorted(int(i) for i in facet_set))
    if not facet_set:
        raise DimensionError("facet set must be nonempty")
    tol = cfg.tolerances
    probe, _ = min_face_distance(
        inst, facet_set, np.zeros(inst.n), cfg.error_norm, tol, engine
    )
    if not math.isfinite(probe):
        return CheckResult(False, 0, {}, "empty facet intersection")
    witnesses = {}
    count = 0
    for k in range(len(data)):
        d, w = min_face_distance(
            inst, facet_set, data.points[k], cfg.error_norm, tol, engine
        )
        if d <= cfg.tau + tol.tol_feas:
            witnesses[k] = w
            count += 1
    q = cfg.selection_count(len(data))
    return CheckResult(count >= q, count, witnesses)


def representative_cost(inst: ForwardInstance, facet_set, p: float):
    """Uniform strict conic combination of the facet rows, p-normalized.

    Returns (c, weights, certificate) with certificate the length-m
    multiplier vector reproducing c from the rows.
    """
    facet_set = tuple(sorted(int(i) for i in facet_set))
    raw = inst.A[list(facet_set)].mean(axis=0)
    nrm = row_norm(raw, p)
    if nrm <= 0:
        raise CertificationError(
            "selected facet rows average to the zero vector; no unit cost exists"
        )
    lam = (1.0 / len(facet_set)) / nrm
    c = raw / nrm
    cert = np.zeros(inst.m)
    cert[list(facet_set)] = lam
    weights = {i: lam for i in facet_set}
    return c, weights, cert


def solution_from_facets(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    facet_set,
    engine: str = "auto",
) -> InverseSolution:
    """Build and certify an InverseSolution from a bare facet set.

    Selected observations are the ceil(theta*K) nearest to the joint tight
    region (ties by index); their witnesses define the errors.
    """
    check = check_inverse_feasible(inst, data, cfg, facet_set, engine)
    if not check.feasible:
        raise CertificationError(
            f"facet set {tuple(facet_set)} failed certification: "
            f"{check.count} points within tau ({check.reason or 'need more'})"
        )
    facet_set = tuple(sorted(int(i) for i in facet_set))
    q = cfg.selection_count(len(data))
    dists = {}
    for k, w in check.witnesses.items():
        dists[k] = vector_norm(data.points[k] - w, cfg.error_norm)
    chosen = sorted(check.witnesses, key=lambda k: (dists[k], k))[:q]
    errors = {k: data.points[k] - check.witnesses[k] for k in sorted(chosen)}
    c, weights, cert = representative_cost(inst, facet_set, cfg.normalization_p)
    return InverseSolution(
        facet_set,
        tuple(sorted(chosen)),
        errors,
        weights,
        c,
        cert,
        len(facet_set),
    )


def certify_solution(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    sol: InverseSolution,
    per_point_rhs: np.ndarray | None = None,
    per_point_tau: np.ndarray | None = None,
) -> None:
    """Machine-check every invariant of an InverseSolution; raise on failure."""
    tol = cfg.tolerances.tol_feas
    q = cfg.selection_count(len(data))
    if len(sol.selected_points) < q:
        raise CertificationError("too few selected observations")
    recon = sum(
        lam * inst.A[i] for i, lam in sol.cone_weights.items()
    )
    if vector_norm(recon - sol.representative_c, NORM_INF) > 1e-6:
        raise CertificationError("cone weights do not reproduce the cost vector")
    if abs(row_norm(sol.representative_c, cfg.normalization_p) - 1.0) > 1e-6:
        raise CertificationError("cost vector is not unit-norm")
    recon_dual = sol.dual_certificate @ inst.A
    if vector_norm(recon_dual - sol.representative_c, NORM_INF) > 1e-6:
        raise CertificationError("dual certificate does not reproduce the cost")
    if np.any(sol.dual_certificate < -1e-9):
        raise CertificationError("dual certificate has negative entries")
    for k in sol.selected_points:
        eps = sol.errors[k]
        tau_k = cfg.tau if per_point_tau is None else float(per_point_tau[k])
        if vector_norm(eps, cfg.error_norm) > tau_k + 10 * tol:
            raise CertificationError(f"error of point {k} exceeds tau")
        x = data.points[k] - eps
        b_k = inst.b if per_point_rhs is None else per_point_rhs[k]
        resid = inst.A @ x - b_k
        for i, s in enumerate(inst.row_senses):
            if s == GE and resid[i] < -10 * tol:
                raise CertificationError(f"image of point {k} leaves the polyhedron")
            if s == EQ and abs(resid[i]) > 10 * tol:
                raise CertificationError(f"image of point {k} violates an equality")
        for i in sol.selected_facets:
            if abs(resid[i]) > 10 * tol:
                raise CertificationError(
                    f"image of point {k} is not tight on facet {i}"
                )


def solve_mqio(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    options: MqioOptions | None = None,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
    distances: np.ndarray | None = None,
) -> InverseSolution:
    """Solve the facet-selection MIP and return a certified solution."""
    options = options or MqioOptions()
    bnb = bnb or DEFAULT_BNB
    if options.restrict_facets is None and options.per_point_rhs is None:
        cand, _ = feasible_facets(inst, data, cfg, distances, engine)
        if not cand:
            hint = min_tau(
                inst, data, cfg.theta, cfg.error_norm, distances, cfg.tolerances, engine
            )
            raise InverseInfeasibleError(
                "no cost vector achieves ceil(theta*K) observations within "
                f"tau={cfg.tau}; the smallest feasible threshold is "
                f"{hint.tau_star:.6g} (facet {hint.facet})",
                min_tau=hint.tau_star,
            )
        options = _with_restrict(options, cand)
    big_m = compute_big_m(
        inst, data, cfg.tau, options.per_point_rhs, cfg.tolerances, engine
    )
    program = build_mqio(inst, data, cfg, big_m, options)
    return solve_built_mqio(inst, data, cfg, program, options, bnb, engine)


def _with_restrict(options: MqioOptions, facets) -> MqioOptions:
    return MqioOptions(
        options.per_point_rhs,
        options.cost_constraints,
        options.per_point_tau,
        tuple(facets),
        options.pin_selection_count,
        options.max_facets,
    )


def solve_built_mqio(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    program: MixedBinaryProgram,
    options: MqioOptions | None = None,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
) -> InverseSolution:
    """Run the MIP and extract, normalize and certify the solution."""
    options = options or MqioOptions()
    bnb = bnb or DEFAULT_BNB
    lay = mqio_layout(inst, data, cfg, options)
    result = solve_mip(program, bnb)
    if result.status == "infeasible":
        hint = None
        if options.per_point_rhs is None:
            mt = min_tau(
                inst, data, cfg.theta, cfg.error_norm, None, cfg.tolerances, engine
            )
            hint = mt.tau_star
        raise InverseInfeasibleError(
            "no cost vector achieves ceil(theta*K) observations within tau"
            + ("" if hint is None else f"; smallest feasible threshold {hint:.6g}"),
            min_tau=hint,
        )
    if result.status != "optimal":
        raise IterationLimitError(
            f"facet-selection MIP stopped at node limit (bound {result.bound})"
        )
    x = result.x
    facets = tuple(
        i for pos, i in enumerate(lay.facets) if x[lay.v_index(pos)] > 0.5
    )
    if not facets:
        hint = min_tau(
            inst, data, cfg.theta, cfg.error_norm, None, cfg.tolerances, engine
        )
        raise InverseInfeasibleError(
            "no facet is selectable at this threshold; smallest feasible "
            f"threshold is {hint.tau_star:.6g}",
            min_tau=hint.tau_star,
        )
    selected = tuple(
        int(k) for k in range(len(data)) if x[lay.u_index(k)] > 0.5
    )
    errors = {k: x[lay.eps_slice(k)].copy() for k in selected}
    c, weights, cert = representative_cost(inst, facets, cfg.normalization_p)
    sol = InverseSolution(
        facets, selected, errors, weights, c, cert, len(facets)
    )
    certify_solution(
        inst, data, cfg, sol, options.per_point_rhs, options.per_point_tau
    )
    if options.per_point_rhs is None:
        check = check_inverse_feasible(inst, data, cfg, facets, engine)
        if not check.feasible:
            raise CertificationError(
                "solved facet set failed the independent feasibility check"
            )
    return sol
