"""Learning matrix product states through log-depth disentangling circuits.

The package simulates a tomography-driven learner: a halving schedule of
block-local unitaries rotates a chain state so that half the register lands
in |0> at every layer, until only a short tail survives.  Inverting the
recorded unitaries yields a state-preparation circuit.  Alongside the learner
live the schedule planner, the block-size solver, tomography oracles, copy
budget formulas, and runnable property suites for the structural guarantees.
"""

from .backend import StateBackend, apply_unitary_density, apply_unitary_vector
from .complexity import (
    ETA_SUBSTITUTION_CONSTANT,
    budget_closest_ours,
    budget_closest_previous,
    budget_closest_previous_alt,
    budget_closest_raw,
    budget_exact_ours,
    budget_exact_previous,
    dominance_ratio,
    final_tomo_budget,
    fit_loglog_slope,
)
from .disentangler import Disentangler, build_rank_capped, build_threshold, idx
from .errors import (
    AuditDisabled,
    BackendTooLarge,
    BadCut,
    BadEpsilon,
    BadParameter,
    BlockOutOfRange,
    DegenerateD,
    DimensionMismatch,
    InvalidSpec,
    MalformedCircuit,
    NegativeArgument,
    NoConvergence,
    NonContiguous,
    NonContiguousSupport,
    NonHermitian,
    NonSquare,
    NotOrthonormal,
    OracleFailure,
    PlanInfeasible,
    RankCapExceedsDim,
    TooLarge,
    TooSmall,
)
from .learner import (
    AuditTrail,
    BlockStats,
    CircuitDescription,
    CircuitUnitary,
    LayerStats,
    LearnReport,
    LearnSchedule,
    extract_mps,
    forward_transform,
    learn,
    load_circuit,
    reconstruct_state,
    residual_projection,
    save_circuit,
    stepwise_state,
)
from .linalg import (
    ToleranceConfig,
    fix_phase,
    gram_schmidt_extend,
    hermitian_eig,
    numerical_rank,
    operator_norm,
    partial_trace,
    project_psd,
    trace_norm,
)
from .mps import (
    MatrixProductState,
    StateSpec,
    block_rdm,
    expand,
    load_mps,
    mps_parameter_count,
    random_mps,
    save_mps,
    schmidt_rank,
)
from .planner import (
    SQRT2_GAP,
    LambertSolution,
    LayerPlan,
    PlannedBlock,
    copy_scale_base,
    eta_closest,
    eta_exact,
    lambert_w,
    p_exact,
    plan_layers,
    select_epsilon,
    solve_p_closest,
    solve_p_from_scale,
)
from .tomography import (
    BoundedNoiseMode,
    ExactMode,
    FiniteSampleMode,
    TomographyOutcome,
    budget_general,
    budget_rank_constrained,
    estimate_block,
    simulate_postselect,
)
from .verify import AVAILABLE_SUITES, CheckResult, SuiteResult, run_suites

__version__ = "0.1.0"

__all__ = [
    "AVAILABLE_SUITES",
    "AuditDisabled",
    "AuditTrail",
    "BackendTooLarge",
    "BadCut",
    "BadEpsilon",
    "BadParameter",
    "BlockOutOfRange",
    "BlockStats",
    "BoundedNoiseMode",
    "CheckResult",
    "CircuitDescription",
    "CircuitUnitary",
    "DegenerateD",
    "DimensionMismatch",
    "Disentangler",
    "ETA_SUBSTITUTION_CONSTANT",
    "ExactMode",
    "FiniteSampleMode",
    "InvalidSpec",
    "LambertSolution",
    "LayerPlan",
    "LayerStats",
    "LearnReport",
    "LearnSchedule",
    "MalformedCircuit",
    "MatrixProductState",
    "NegativeArgument",
    "NoConvergence",
    "NonContiguous",
    "NonContiguousSupport",
    "NonHermitian",
    "NonSquare",
    "NotOrthonormal",
    "OracleFailure",
    "PlanInfeasible",
    "PlannedBlock",
    "RankCapExceedsDim",
    "SQRT2_GAP",
    "StateBackend",
    "StateSpec",
    "SuiteResult",
    "ToleranceConfig",
    "TomographyOutcome",
    "TooLarge",
    "TooSmall",
    "apply_unitary_density",
    "apply_unitary_vector",
    "block_rdm",
    "budget_closest_ours",
    "budget_closest_previous",
    "budget_closest_previous_alt",
    "budget_closest_raw",
    "budget_exact_ours",
    "budget_exact_previous",
    "budget_general",
    "budget_rank_constrained",
    "build_rank_capped",
    "build_threshold",
    "copy_scale_base",
    "dominance_ratio",
    "estimate_block",
    "eta_closest",
    "eta_exact",
    "expand",
    "extract_mps",
    "final_tomo_budget",
    "fit_loglog_slope",
    "fix_phase",
    "forward_transform",
    "gram_schmidt_extend",
    "hermitian_eig",
    "idx",
    "lambert_w",
    "learn",
    "load_circuit",
    "load_mps",
    "mps_parameter_count",
    "numerical_rank",
    "operator_norm",
    "p_exact",
    "partial_trace",
    "plan_layers",
    "project_psd",
    "random_mps",
    "reconstruct_state",
    "residual_projection",
    "run_suites",
    "save_circuit",
    "save_mps",
    "schmidt_rank",
    "select_epsilon",
    "simulate_postselect",
    "solve_p_closest",
    "solve_p_from_scale",
    "stepwise_state",
    "trace_norm",
]
