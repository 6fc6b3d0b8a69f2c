"""Performance-loss bounds for planning with an approximate MDP model, measured in weighted norms."""

from .bounds import (
    BoundReport,
    ValueEnvelope,
    best_bound_over_transforms,
    best_envelope_over_weights,
    envelope,
    openloop_bound,
    performance_loss_bound,
    policy_error_bound,
    value_error_bound,
    witness_kappa,
)
from .ipm import (
    IpmKind,
    ModelDistance,
    ScalarNoiseSystem,
    certainty_equivalence_bound,
    ipm_distance,
    ipm_performance_bound,
    minkowski,
    mismatch_from_distance,
    model_distance,
)
from .mdp import (
    IDENTITY,
    AffineTransform,
    ConvergenceError,
    FiniteMdp,
    InvalidInputError,
    Policy,
    bellman_optimal,
    bellman_policy,
    greedy,
    policy_evaluation,
    value_iteration,
)
from .mismatch import (
    ModelPair,
    mismatch_max,
    mismatch_optimal,
    mismatch_policy,
    mismatch_policy_pair,
)
from .weighting import (
    AssumptionReport,
    StabilityCert,
    WeightFn,
    check_assumptions,
    kappa_model,
    kappa_policy,
    weighted_norm,
)

__version__ = "0.1.0"
