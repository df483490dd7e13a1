"""qilp: fit linear-program cost vectors to noisy observed decisions.

The toolkit infers, from a known feasible region and a set of observed
decision vectors, the cost vectors under which a quantile of the
observations is near-optimal; it exposes the facet-selection MIP, the
indicator-matrix decomposition algorithms, stability diagnostics, an
online variant for batch streams, and generators for benchmark instances.
"""

from .bnb import BnBConfig, MipSolution, MixedBinaryProgram, solve_mip
from .biclique import (
    AlgResult,
    BiAdjacency,
    CliqueResult,
    WeightVector,
    build_dbar,
    dbar_alg_exact,
    dbar_alg_heuristic,
    dtilde_alg_heuristic,
    order_dataset,
    solve_clique,
    solve_reduced,
)
from .errors import (
    CertificationError,
    DimensionError,
    InverseInfeasibleError,
    IterationLimitError,
    QilpError,
    SolverError,
    UnboundedProblemError,
)
from .instances import (
    TRANSSHIPMENT_TRUE_COST,
    diet_instance,
    gen_noisy_data,
    gen_random_instance,
    gen_transshipment_stream,
    transshipment_instance,
)
from .inverse import (
    BigMParams,
    CheckResult,
    InverseSolution,
    MinTauResult,
    MqioOptions,
    PreviousModelResult,
    QioConfig,
    build_mqio,
    check_inverse_feasible,
    compute_big_m,
    facet_distance_matrix,
    feasible_facets,
    min_tau,
    mqio_layout,
    quantile_count,
    shift_count,
    solution_from_facets,
    solve_mqio,
    solve_previous_model,
)
from .online import (
    Batch,
    OnlineState,
    OnlineStepRecord,
    cost_in_cone,
    online_step,
    run_online,
    solve_online_batch_mip,
)
from .polytope import (
    Dataset,
    ForwardInstance,
    ForwardResult,
    coordinate_ranges,
    face_max_distance,
    facet_diameter,
    max_point_distance,
    min_face_distance,
    min_facet_distance,
    normalize_instance,
    solve_forward,
)
from .simplex import (
    LinearProgram,
    LpSolution,
    SolverTolerances,
    dual_objective_value,
    solve_lp,
)
from .stability import (
    ShiftExperimentConfig,
    StabilityReport,
    empirical_inverse_stability,
    forward_stability,
    forward_stability_sweep,
    forward_stability_ub,
    inverse_stability_lb,
    per_facet_stability_bounds,
    sample_cone_costs,
)

__version__ = "0.1.0"
