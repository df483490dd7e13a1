"""Stability diagnostics for inverse fits.

Inverse stability asks how far the data must shift before every initially
inverse-feasible cost vector is lost; a closed-form lower bound comes from
clipping the per-facet point distances, and an empirical upper bound comes
from shifting the most exposed points until the per-facet feasibility
screen goes empty.  Forward stability asks how far the forward optimum of
a fitted cost can sit from the selected observations; it is computed
exactly under the max norm and bounded above from facet diameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .inverse import (
    InverseSolution,
    QioConfig,
    facet_distance_matrix,
    feasible_facets,
    shift_count,
)
from .polytope import (
    Dataset,
    ForwardInstance,
    face_max_distance,
    min_face_distance,
    min_facet_distance,
    row_norm,
)


def per_facet_stability_bounds(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    facet_set,
    distances: np.ndarray | None = None,
    engine: str = "auto",
) -> dict:
    """Clipped-distance lower-bound contribution of each selected facet.

    For facet i, take the largest floor((1-theta)K)+1 point distances and
    sum how far each sits inside the threshold; shifting fewer points, or
    cheaper shifts, cannot make facet i infeasible.
    """
    if distances is None:
        distances = facet_distance_matrix(
            inst, data, cfg.error_norm, cfg.tolerances, engine
        )
    r = shift_count(cfg.theta, len(data))
    out = {}
    for i in facet_set:
        col = np.sort(distances[:, int(i)])[::-1][:r]
        out[int(i)] = float(np.maximum(0.0, cfg.tau - col).sum())
    return out


def inverse_stability_lb(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    solution: InverseSolution,
    distances: np.ndarray | None = None,
    engine: str = "auto",
) -> float:
    """Lower bound on the minimum data-shift distance destroying the fit."""
    if not solution.selected_facets:
        raise DimensionError("solution selects no facets")
    bounds = per_facet_stability_bounds(
        inst, data, cfg, solution.selected_facets, distances, engine
    )
    return max(bounds.values())


@dataclass(frozen=True)
class ShiftExperimentConfig:
    """Controls for the empirical shift experiment.

    ``shift_count`` defaults to floor((1-theta)K)+1, the smallest number of
    points whose loss can break a facet's coverage.  Points are chosen as
    the ones farthest from the generator facets (ties by index) unless
    ``random_selection`` is set.
    """

    gamma_grid: tuple
    shift_count: int | None = None
    rng_seed: int = 0
    trials: int = 1
    random_selection: bool = False

    def __post_init__(self):
        grid = tuple(float(g) for g in self.gamma_grid)
        if not grid or any(g <= 0 for g in grid):
            raise DimensionError("gamma grid must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DimensionError("gamma grid must be strictly ascending")
        object.__setattr__(self, "gamma_grid", grid)


def _facet_screen_empty(inst, points, cfg, facet_set, engine) -> bool:
    """True when no generator facet covers ceil(theta*K) shifted points."""
    q = cfg.selection_count(points.shape[0])
    slack = cfg.tolerances.tol_feas
    for i in facet_set:
        hits = 0
        for k in range(points.shape[0]):
            d, _ = min_facet_distance(
                inst, int(i), points[k], cfg.error_norm, cfg.tolerances, engine
            )
            if d <= cfg.tau + slack:
                hits += 1
                if hits >= q:
                    break
        if hits >= q:
            return False
    return True


def empirical_inverse_stability(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    exp: ShiftExperimentConfig,
    trial: int = 0,
    base_facets=None,
    distances: np.ndarray | None = None,
    engine: str = "auto",
):
    """Smallest tested shift making every generator facet infeasible.

    Walks the gamma grid, drawing uniform nonnegative shifts for the chosen
    points, until the per-facet screen goes empty; returns
    ``(distance, gamma)`` or None when the grid is exhausted.  The distance
    is the sum of the max-norm shift sizes actually applied.
    """
    if base_facets is None:
        base_facets, _ = feasible_facets(inst, data, cfg, distances, engine)
    base_facets = tuple(int(i) for i in base_facets)
    if not base_facets:
        raise DimensionError("no generator facets: the initial model is infeasible")
    if distances is None:
        distances = facet_distance_matrix(
            inst, data, cfg.error_norm, cfg.tolerances, engine
        )
    K = len(data)
    count = exp.shift_count or shift_count(cfg.theta, K)
    count = min(count, K)
    rng = np.random.default_rng([exp.rng_seed, trial])
    if exp.random_selection:
        chosen = np.sort(rng.choice(K, size=count, replace=False))
    else:
        score = distances[:, list(base_facets)].min(axis=1)
        order = sorted(range(K), key=lambda k: (-score[k], k))
        chosen = np.array(sorted(order[:count]))
    for gamma in exp.gamma_grid:
        shifts = rng.uniform(0.0, gamma, size=(count, inst.n))
        shifted = data.points.copy()
        shifted[chosen] += shifts
        if _facet_screen_empty(inst, shifted, cfg, base_facets, engine):
            dist = float(np.abs(shifts).max(axis=1).sum())
            return dist, float(gamma)
    return None


def forward_stability(
    inst: ForwardInstance,
    data: Dataset,
    c,
    selected,
    engine: str = "auto",
) -> float:
    """Worst max-norm distance from the selected points to the optimal face."""
    cfg_tol = None
    worst = 0.0
    for k in selected:
        d = face_max_distance(inst, c, data.points[int(k)], engine=engine)
        worst = max(worst, d)
    return worst


def forward_stability_ub(
    inst: ForwardInstance,
    data: Dataset,
    solution: InverseSolution,
    rho,
    engine: str = "auto",
) -> float:
    """Upper bound: witness distance plus the smallest facet diameter.

    ``rho`` maps each selected facet to (an upper bound on) the diameter of
    its facet region in the error norm.
    """
    facets = solution.selected_facets
    rho_min = min(float(rho[i]) for i in facets)
    cfg_norm = "inf"
    worst = 0.0
    for k in solution.selected_points:
        d, _ = min_face_distance(
            inst, facets, data.points[int(k)], cfg_norm, engine=engine
        )
        worst = max(worst, d + rho_min)
    return worst


@dataclass(frozen=True)
class StabilityReport:
    """Bundle of the stability diagnostics for one fitted solution."""

    lower_bound: float
    empirical_upper: float | None
    per_facet_bounds: dict
    forward_stability: float | None
    emptiness_criterion: str = "facet_sufficient"

    def __post_init__(self):
        if (
            self.empirical_upper is not None
            and self.empirical_upper < self.lower_bound - 1e-9
        ):
            raise DimensionError(
                "empirical estimate fell below the proven lower bound"
            )


def forward_stability_sweep(
    inst: ForwardInstance,
    data: Dataset,
    cfg: QioConfig,
    h_values=None,
    samples: int = 50,
    rng_seed: int = 0,
    engine: str = "auto",
    bnb=None,
):
    """Cap the facet count at h, refit, and sample forward stability.

    For each cap the selection MIP is re-solved with an added cardinality
    row, ``samples`` random cone costs are drawn, and the worst distance to
    that fit's selected points is recorded per draw.  Returns
    ``(rows, fits)`` with rows of ``(h, sample_index, distance)``.
    """
    from .inverse import MqioOptions, solve_mqio

    distances = facet_distance_matrix(
        inst, data, cfg.error_norm, cfg.tolerances, engine
    )
    candidates, _ = feasible_facets(inst, data, cfg, distances, engine)
    base = solve_mqio(
        inst, data, cfg,
        MqioOptions(restrict_facets=candidates),
        bnb=bnb, engine=engine, distances=distances,
    )
    if h_values is None:
        h_values = tuple(range(1, base.objective + 1))
    rows = []
    fits = {}
    for h in h_values:
        if h >= base.objective:
            fit = base
        else:
            fit = solve_mqio(
                inst, data, cfg,
                MqioOptions(restrict_facets=candidates, max_facets=int(h)),
                bnb=bnb, engine=engine, distances=distances,
            )
        fits[int(h)] = fit
        costs = sample_cone_costs(
            inst, fit.selected_facets, samples,
            rng_seed=[rng_seed, int(h)], p=cfg.normalization_p,
        )
        for s, c in enumerate(costs):
            d = forward_stability(inst, data, c, fit.selected_points, engine)
            rows.append((int(h), s, float(d)))
    return rows, fits


def sample_cone_costs(
    inst: ForwardInstance,
    facet_set,
    count: int,
    rng_seed: int = 0,
    p: float | None = None,
) -> list:
    """Random strict conic combinations of the facet rows, unit p-norm."""
    facet_set = [int(i) for i in facet_set]
    if not facet_set:
        raise DimensionError("cannot sample from an empty cone")
    p = 2.0 if p is None else p
    rng = np.random.default_rng(rng_seed)
    out = []
    rows = inst.A[facet_set]
    for _ in range(count):
        lam = rng.uniform(0.1, 1.0, size=len(facet_set))
        c = lam @ rows
        nrm = row_norm(c, p)
        if nrm <= 1e-12:
            c = rows.mean(axis=0)
            nrm = row_norm(c, p)
        out.append(c / nrm)
    return out
