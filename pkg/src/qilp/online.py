"""Online inference over time-stamped batches with varying right-hand sides.

Each step observes a signal (the rhs of the forward problem) and a batch
of noisy decisions, solves one weighted single-batch selection problem to
produce an indicator row, and keeps the clique of the grown row matrix as
the current cost-vector cone.  A one-shot batch MIP over all elapsed
batches serves as a small-scale validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biclique import (
    TIE_BONUS,
    BiAdjacency,
    CliqueResult,
    _per_element_slopes,
    solve_clique,
)
from .bnb import BnBConfig, solve_mip
from .errors import DimensionError
from .inverse import (
    InverseSolution,
    MqioOptions,
    QioConfig,
    build_mqio,
    compute_big_m,
    mqio_layout,
    quantile_count,
    solve_built_mqio,
)
from .polytope import Dataset, ForwardInstance, min_facet_distance, solve_forward
from .simplex import GE, LinearProgram, solve_lp
from .stability import sample_cone_costs


@dataclass(frozen=True)
class Batch:
    """One time step: a right-hand side, its observed decisions, a threshold."""

    rhs: np.ndarray
    points: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float).ravel())
        object.__setattr__(
            self, "points", np.atleast_2d(np.asarray(self.points, dtype=float))
        )
        if self.points.shape[0] < 1:
            raise DimensionError("a batch needs at least one point")


@dataclass(frozen=True)
class OnlineState:
    """Accumulated rows, weights and cone history of an online run.

    Weights follow the cone-reinforcement rule: facets in the current cone
    get weight 1, the rest 1/2, all ones before the first step.
    """

    instance: ForwardInstance
    rows: tuple
    weights: np.ndarray
    cone_history: tuple
    infeasible_steps: tuple

    @classmethod
    def fresh(cls, instance: ForwardInstance) -> "OnlineState":
        return cls(instance, (), np.ones(instance.m), (), ())

    @property
    def t(self) -> int:
        return len(self.rows)

    @property
    def current_cone(self) -> tuple:
        return self.cone_history[-1] if self.cone_history else ()

    def matrix(self) -> BiAdjacency:
        entries = (
            np.array(self.rows, dtype=np.int8)
            if self.rows
            else np.zeros((0, self.instance.m), dtype=np.int8)
        )
        return BiAdjacency(
            entries, "Dbar", tuple(range(len(self.rows))),
            None, self.infeasible_steps,
        )


def _with_rhs(inst: ForwardInstance, rhs) -> ForwardInstance:
    return ForwardInstance(
        inst.A, rhs, inst.row_senses, inst.name,
        inst.normalization_p, inst.full_dimensional,
    )


def _batch_candidates(inst_t, points, tau, cfg, engine):
    q = quantile_count(cfg.theta, points.shape[0])
    slack = cfg.tolerances.tol_feas
    out = []
    for i in inst_t.facet_indices:
        hits = 0
        for k in range(points.shape[0]):
            d, _ = min_facet_distance(
                inst_t, i, points[k], cfg.error_norm, cfg.tolerances, engine
            )
            if d <= tau + slack:
                hits += 1
                if hits >= q:
                    break
        if hits >= q:
            out.append(i)
    return tuple(out)


def online_step(
    state: OnlineState,
    batch: Batch,
    cfg: QioConfig,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
):
    """Consume one batch; returns the new state and the current facet cone.

    The batch's selection problem shares one indicator row across its
    points and maximizes the weight-adjusted row; an infeasible batch
    appends an all-zero row and leaves the cone unchanged.
    """
    inst_t = _with_rhs(state.instance, batch.rhs)
    step_cfg = QioConfig(
        batch.tau, cfg.theta, cfg.error_norm, cfg.normalization_p, cfg.tolerances
    )
    data_t = Dataset(batch.points)
    cand = _batch_candidates(inst_t, batch.points, batch.tau, step_cfg, engine)
    row = np.zeros(state.instance.m, dtype=np.int8)
    feasible = bool(cand)
    if cand:
        options = MqioOptions(restrict_facets=cand)
        big_m = compute_big_m(inst_t, data_t, batch.tau, None, cfg.tolerances, engine)
        program = build_mqio(inst_t, data_t, step_cfg, big_m, options)
        lay = mqio_layout(inst_t, data_t, step_cfg, options)
        slopes = _per_element_slopes(state.instance.m)
        for pos, i in enumerate(lay.facets):
            program.base.objective[lay.v_index(pos)] = (
                state.weights[i] + TIE_BONUS + slopes[i]
            )
        result = solve_mip(program, bnb or BnBConfig(engine=engine))
        if result.status == "optimal":
            for pos, i in enumerate(lay.facets):
                if result.x[lay.v_index(pos)] > 0.5:
                    row[i] = 1
        else:
            feasible = False
    rows = state.rows + (row,)
    flagged = state.infeasible_steps + (() if feasible else (state.t,))
    mat = BiAdjacency(
        np.array(rows, dtype=np.int8), "Dbar",
        tuple(range(len(rows))), None, flagged,
    )
    clique = solve_clique(mat, cfg.theta, bnb, engine)
    if clique.objective > 0:
        cone = clique.cols
    else:
        cone = state.current_cone if not feasible else clique.cols
    indicator = np.zeros(state.instance.m)
    if cone:
        indicator[list(cone)] = 1.0
    new_w = (1.0 + indicator) / float((1.0 + indicator).max())
    new_state = OnlineState(
        state.instance,
        rows,
        new_w,
        state.cone_history + (cone,),
        flagged,
    )
    return new_state, cone


def solve_online_batch_mip(
    template: ForwardInstance,
    batches,
    cfg: QioConfig,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
) -> InverseSolution:
    """One-shot selection MIP over every batch (small-horizon oracle).

    A single facet-indicator vector is shared across all batches while each
    observation keeps its own rhs, threshold and selection binary.
    """
    points = np.vstack([b.points for b in batches])
    rhs = np.vstack(
        [np.tile(b.rhs, (b.points.shape[0], 1)) for b in batches]
    )
    taus = np.concatenate(
        [np.full(b.points.shape[0], b.tau) for b in batches]
    )
    data = Dataset(points)
    q = quantile_count(cfg.theta, len(data))
    slack = cfg.tolerances.tol_feas
    cand = []
    for i in template.facet_indices:
        hits = 0
        for k in range(len(data)):
            inst_k = _with_rhs(template, rhs[k])
            d, _ = min_facet_distance(
                inst_k, i, points[k], cfg.error_norm, cfg.tolerances, engine
            )
            if d <= taus[k] + slack:
                hits += 1
                if hits >= q:
                    break
        if hits >= q:
            cand.append(i)
    options = MqioOptions(
        per_point_rhs=rhs, per_point_tau=taus, restrict_facets=tuple(cand)
    )
    big_m = compute_big_m(template, data, cfg.tau, rhs, cfg.tolerances, engine)
    program = build_mqio(template, data, cfg, big_m, options)
    return solve_built_mqio(template, data, cfg, program, options, bnb, engine)


def cost_in_cone(
    inst: ForwardInstance, c, facet_set, tol: float = 1e-7, engine: str = "auto"
) -> bool:
    """Whether c is a nonnegative combination of the given facet rows."""
    facet_set = [int(i) for i in facet_set]
    if not facet_set:
        return False
    c = np.asarray(c, dtype=float).ravel()
    rows = inst.A[facet_set]
    nF = len(facet_set)
    n = inst.n
    # lambda (>=0), residual split r+ , r-  with  rows.T lambda + r+ - r- = c
    width = nF + 2 * n
    mat = np.zeros((n, width))
    mat[:, :nF] = rows.T
    mat[:, nF : nF + n] = np.eye(n)
    mat[:, nF + n :] = -np.eye(n)
    obj = np.zeros(width)
    obj[nF:] = 1.0
    lp = LinearProgram(
        obj, mat, ("==",) * n, c,
        bounds=[(0.0, None)] * width,
    )
    sol = solve_lp(lp, engine=engine)
    return sol.is_optimal and sol.objective_value <= tol


@dataclass(frozen=True)
class OnlineStepRecord:
    t: int
    cone_size: int
    distance: float | None
    cum_err_true: float | None
    cum_err_sampled: float | None
    cone: tuple


def run_online(
    template: ForwardInstance,
    batches,
    cfg: QioConfig,
    probe_samples: int = 5,
    c_true=None,
    rng_seed: int = 0,
    bnb: BnBConfig | None = None,
    engine: str = "auto",
):
    """Drive the online loop and probe each step's cone with sampled costs.

    Per step, sampled cone costs are pushed through the forward problem at
    that step's rhs; the record keeps the mean worst-case distance to the
    batch and running means of the objective-error metrics (only when the
    true cost is supplied for the latter).
    """
    state = OnlineState.fresh(template)
    records = []
    err_true_terms = []
    err_sampled_terms = []
    for t, batch in enumerate(batches, start=1):
        state, cone = online_step(state, batch, cfg, bnb, engine)
        if not cone:
            records.append(OnlineStepRecord(t, 0, None, None, None, ()))
            continue
        costs = sample_cone_costs(
            template, cone, probe_samples, rng_seed=[rng_seed, t],
            p=cfg.normalization_p,
        )
        inst_t = _with_rhs(template, batch.rhs)
        dists = []
        errs_true = []
        errs_sampled = []
        for c in costs:
            fwd = solve_forward(inst_t, c, cfg.tolerances, engine)
            gap = np.abs(batch.points - fwd.x[None, :]).max(axis=1)
            dists.append(float(gap.max()))
            if c_true is not None:
                diff = fwd.x[None, :] - batch.points
                errs_true.append(float((diff @ np.asarray(c_true)).mean()))
                errs_sampled.append(float((diff @ c).mean()))
        if c_true is not None:
            err_true_terms.append(float(np.mean(errs_true)))
            err_sampled_terms.append(float(np.mean(errs_sampled)))
            cum_true = float(np.mean(err_true_terms))
            cum_sampled = float(np.mean(err_sampled_terms))
        else:
            cum_true = cum_sampled = None
        records.append(
            OnlineStepRecord(
                t, len(cone), float(np.mean(dists)), cum_true, cum_sampled, cone
            )
        )
    return state, records
