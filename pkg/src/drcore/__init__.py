"""Distributionally robust cores for coalitional games with uncertain values."""
from .ambiguity import (
    AmbiguityConfig,
    TailParams,
    aggregate_confidence,
    aggregate_confidence_bonferroni,
    beta_from_radius,
    radius_from_beta,
    wasserstein_1d,
)
from .core import (
    Allocation,
    CorePolyhedron,
    build_dr_core,
    build_expected_core,
    check_allocation,
    check_containment,
    find_allocation,
)
from .distributions import (
    DiscreteDistribution,
    EmpiricalDistribution,
    SamplingPlan,
    TruncatedGaussianSpec,
    build_multisamples,
    sample_truncated_gaussian,
    true_mean_value,
)
from .errors import EmptyCoreError
from .game_model import (
    BoxSupport,
    GameSpec,
    NormTag,
    PiecewiseAffineValue,
    enumerate_subcoalitions,
    evaluate_value,
    lipschitz_constant,
    reference_game,
)
from .worst_case import (
    worst_case,
    worst_case_closed_form_affine,
    worst_case_dual_lp,
    worst_case_oracle,
)

__version__ = "0.1.0"
