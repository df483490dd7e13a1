"""Instance generators and the two bundled case studies.

Random instances sample unit rows around an interior anchor and close the
region with a bounding box, so every generated polyhedron is bounded and
has an interior.  The nutrition instance encodes per-serving nutrient data
with lower/upper intake limits and serving caps; the two-supplier
transshipment network carries its known true cost vector for online
experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .polytope import (
    Dataset,
    ForwardInstance,
    coordinate_ranges,
    normalize_instance,
    row_norm,
    solve_forward,
)
from .simplex import DEFAULT_TOL, SolverTolerances


def gen_random_instance(
    n: int,
    m: int,
    seed: int,
    p: float = 2.0,
    box_radius: float = 3.0,
    offset_range=(0.5, 2.0),
    name: str | None = None,
) -> ForwardInstance:
    """Random bounded instance: m-2n unit rows plus an enclosing box.

    Each sampled row passes at an offset drawn from ``offset_range`` on the
    far side of the origin, which keeps the origin interior with margin at
    least the smallest offset.  Deterministic in the seed.
    """
    if m <= 2 * n:
        raise DimensionError("need m > 2n rows beyond the enclosing box")
    rng = np.random.default_rng(seed)
    rows = []
    rhs = []
    n_sampled = m - 2 * n
    while len(rows) < n_sampled:
        raw = rng.normal(size=n)
        nrm = row_norm(raw, p)
        if nrm < 1e-9:
            continue
        a = raw / nrm
        off = rng.uniform(*offset_range)
        rows.append(a)
        rhs.append(-off)  # a.x >= a.x0 - off with x0 at the origin
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(e.copy())
        rhs.append(-box_radius)
        rows.append(-e)
        rhs.append(-box_radius)
    inst = normalize_instance(
        np.array(rows),
        np.array(rhs),
        p,
        name=name or f"random-n{n}-m{m}-s{seed}",
    )
    return inst


def gen_noisy_data(
    inst: ForwardInstance,
    c_true,
    K: int,
    noise_sigma: float,
    outlier_frac: float = 0.0,
    seed: int = 0,
    tol: SolverTolerances = DEFAULT_TOL,
) -> Dataset:
    """Observations around the forward optimum, with optional box outliers."""
    if K < 1:
        raise DimensionError("need at least one observation")
    base = solve_forward(inst, c_true, tol).x
    rng = np.random.default_rng(seed)
    pts = base[None, :] + noise_sigma * rng.normal(size=(K, inst.n))
    n_out = int(math.floor(outlier_frac * K))
    if n_out > 0:
        lows, highs = coordinate_ranges(inst, (), tol)
        picks = rng.choice(K, size=n_out, replace=False)
        pts[picks] = rng.uniform(lows, highs, size=(n_out, inst.n))
    return Dataset(pts)


_DIET_NUTRIENTS = (
    # name, per-serving amounts for the 9 food types, lower limit, upper limit
    ("energy_kcal", (91.53, 68.94, 23.51, 65.49, 110.88, 83.28, 80.50, 63.20, 52.16), 1800.0, 2500.0),
    ("total_fat_g", (4.95, 0.71, 1.80, 3.48, 6.84, 4.41, 5.80, 0.94, 0.18), 44.0, 78.0),
    ("carbohydrate_g", (6.89, 12.16, 0.25, 0.00, 5.44, 4.68, 0.56, 11.42, 13.59), 220.0, 330.0),
    ("protein_g", (4.90, 3.68, 1.59, 7.99, 6.80, 5.93, 6.27, 2.40, 0.41), 56.0, None),
    ("fiber_g", (0.00, 0.06, 0.00, 0.00, 0.28, 0.29, 0.00, 1.19, 1.81), 20.0, 30.0),
    ("vitamin_c_mg", (0.01, 1.76, 0.00, 0.00, 0.17, 0.16, 0.00, 0.02, 11.19), 90.0, 2000.0),
    ("vitamin_b6_mg", (0.06, 0.03, 0.01, 0.09, 0.11, 0.06, 0.06, 0.03, 0.10), 1.30, 100.0),
    ("vitamin_b12_mcg", (0.67, 0.39, 0.09, 0.65, 0.11, 0.63, 0.56, 0.00, 0.00), 2.40, None),
    ("calcium_mg", (172.09, 125.72, 46.24, 2.21, 5.90, 15.03, 29.00, 27.21, 6.14), 1000.0, 2500.0),
    ("iron_mg", (0.05, 0.08, 0.04, 0.75, 0.35, 0.35, 0.73, 0.79, 0.13), 8.0, 45.0),
    ("copper_mg", (0.02, 0.04, 0.01, 0.03, 0.03, 0.03, 0.04, 0.05, 0.06), 0.90, 10.0),
    ("sodium_mg", (61.02, 48.24, 65.08, 72.32, 211.05, 128.27, 223.50, 125.62, 1.42), 1500.0, 2300.0),
    ("vitamin_a_mcg", (42.89, 22.24, 12.78, 0.00, 1.33, 9.53, 81.00, 0.01, 13.04), 900.0, 3000.0),
)

_DIET_MAX_SERVINGS = (4, 8, 4, 5, 5, 5, 4, 4, 8)


def diet_instance(p: float = 2.0, literal: bool = False):
    """Nine-food serving-count model with nutrient windows and serving caps.

    Rows, in order: one lower-limit row per nutrient, one upper-limit row
    per nutrient that has a finite limit, one serving cap per food, one
    nonnegativity row per food.  Everything is cast to >= form and
    row-normalized.  Returns the instance and a metadata dict naming each
    row.

    The tabulated vitamin A floor (900) exceeds the largest intake the
    serving caps allow (883.26), so that single row makes the literal
    system empty.  By default it is dropped and recorded under
    ``metadata["omitted_rows"]``; pass ``literal=True`` for the full,
    infeasible encoding.
    """
    n = len(_DIET_MAX_SERVINGS)
    rows, rhs, labels = [], [], []
    omitted = []
    for name, amounts, lower, _ in _DIET_NUTRIENTS:
        if not literal and name == "vitamin_a_mcg":
            omitted.append(f"{name}:lower")
            continue
        rows.append(np.array(amounts))
        rhs.append(lower)
        labels.append(f"{name}:lower")
    for name, amounts, _, upper in _DIET_NUTRIENTS:
        if upper is None:
            continue
        rows.append(-np.array(amounts))
        rhs.append(-upper)
        labels.append(f"{name}:upper")
    for j, cap in enumerate(_DIET_MAX_SERVINGS):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(-e)
        rhs.append(-float(cap))
        labels.append(f"food{j + 1}:max_serving")
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(e)
        rhs.append(0.0)
        labels.append(f"food{j + 1}:nonneg")
    inst = normalize_instance(
        np.array(rows), np.array(rhs), p, name="diet", validate=not literal
    )
    meta = {
        "rows": tuple(labels),
        "foods": tuple(f"food{j + 1}" for j in range(n)),
        "nutrients": tuple(t[0] for t in _DIET_NUTRIENTS),
        "omitted_rows": tuple(omitted),
    }
    return inst, meta


TRANSSHIPMENT_TRUE_COST = np.array(
    [0.2393, 0.1496, 0.0935, 0.1232, 0.1141, 0.0320, 0.1615, 0.0867]
)

_TRANSSHIPMENT_VARS = ("p1", "p2", "t13", "t14", "t23", "t25", "t34", "t35")
_ARC_CAPACITY = 1.3
_PRODUCTION_CAPACITY = (3.0, 1.5)


def transshipment_instance(demand, p: float = 2.0):
    """Two-supplier network with a middle hub and two demand nodes.

    Variables: production at nodes 1 and 2, then flow on arcs 1->3, 1->4,
    2->3, 2->5, 3->4, 3->5.  Balance equations are encoded as opposing
    inequality pairs so each direction is its own facet; the instance is
    therefore flat (not full-dimensional).  Returns the instance, the true
    cost vector, and metadata.
    """
    demand = np.asarray(demand, dtype=float).ravel()
    if demand.shape != (2,):
        raise DimensionError("demand must have entries for nodes 4 and 5")
    n = 8
    idx = {v: j for j, v in enumerate(_TRANSSHIPMENT_VARS)}

    def row(coeffs):
        r = np.zeros(n)
        for var, val in coeffs.items():
            r[idx[var]] = val
        return r

    balances = (
        (row({"t13": 1, "t14": 1, "p1": -1}), 0.0, "supply1"),
        (row({"t23": 1, "t25": 1, "p2": -1}), 0.0, "supply2"),
        (row({"t14": 1, "t34": 1}), float(demand[0]), "demand4"),
        (row({"t25": 1, "t35": 1}), float(demand[1]), "demand5"),
        (row({"t13": 1, "t23": 1, "t34": -1, "t35": -1}), 0.0, "hub3"),
    )
    rows, rhs, labels = [], [], []
    for r, b, label in balances:
        rows.append(r)
        rhs.append(b)
        labels.append(f"{label}:ge")
        rows.append(-r)
        rhs.append(-b)
        labels.append(f"{label}:le")
    for var in _TRANSSHIPMENT_VARS[2:]:
        rows.append(-row({var: 1}))
        rhs.append(-_ARC_CAPACITY)
        labels.append(f"{var}:capacity")
    for var, cap in zip(_TRANSSHIPMENT_VARS[:2], _PRODUCTION_CAPACITY):
        rows.append(-row({var: 1}))
        rhs.append(-cap)
        labels.append(f"{var}:capacity")
    for var in _TRANSSHIPMENT_VARS:
        rows.append(row({var: 1}))
        rhs.append(0.0)
        labels.append(f"{var}:nonneg")
    inst = normalize_instance(
        np.array(rows),
        np.array(rhs),
        p,
        name="transshipment",
        full_dimensional=False,
    )
    meta = {
        "rows": tuple(labels),
        "variables": _TRANSSHIPMENT_VARS,
        "demand": (float(demand[0]), float(demand[1])),
        "c_true": TRANSSHIPMENT_TRUE_COST.tolist(),
    }
    return inst, TRANSSHIPMENT_TRUE_COST.copy(), meta


def gen_transshipment_stream(
    T: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    points_per_batch: int = 3,
    tau: float = 0.05,
    demand_low: float = 0.0,
    demand_high: float = 1.1,
    p: float = 2.0,
):
    """Simulated batch stream: random demands, optimal decisions plus noise.

    Returns (template instance, batches, c_true).  With zero noise every
    decision is exactly optimal for the drawn demand.
    """
    from .online import Batch  # local import to keep module layering acyclic

    rng = np.random.default_rng(seed)
    template, c_true, _ = transshipment_instance((0.0, 0.0), p)
    batches = []
    for _ in range(T):
        d = rng.uniform(demand_low, demand_high, size=2)
        inst_t, _, _ = transshipment_instance(d, p)
        x_opt = solve_forward(inst_t, c_true).x
        pts = x_opt[None, :] + noise_sigma * rng.normal(
            size=(points_per_batch, 8)
        )
        batches.append(Batch(inst_t.b, pts, tau))
    return template, batches, c_true
