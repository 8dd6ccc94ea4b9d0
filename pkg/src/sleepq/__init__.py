"""Exact analysis and optimization of a two-group sleep-mode server cluster.

A loss queue feeds two server groups: group 1 (n servers) always works,
group 2 (m servers) can sleep to save energy. A policy vector d decides how
many group-2 servers wake at each backlog level. This package computes the
stationary law, long-run average profit, performance potentials, critical
service prices, and optimal policies in closed or enumerated form, plus a
discrete-event simulator for cross-checking.
"""

from .chain import (
    ChainSolution,
    Generator,
    build_generator,
    service_rate,
    stationary_closed_form,
    stationary_numeric,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DegeneratePriceError,
    GateError,
    NumericalError,
    RegimeError,
    SleepqError,
)
from .model import (
    FULL_SPACE_MAX_M,
    POLICY_SPACES,
    REDUCED_SPACE_MAX_M,
    ModelParams,
    Policy,
    StateSpace,
    ValidationReport,
    canonicalize_policy,
    check_policy,
    enumerate_policies,
    format_policy,
    params_digest,
    params_from_file,
    params_to_text,
    parse_params,
    parse_policy,
    policy_space_size,
    state_space,
    threshold_policy,
    validate,
)
from .optimize import (
    MonotonicityReport,
    OptimizationResult,
    ThresholdResult,
    evaluate_policies,
    optimal_extreme_prices,
    optimize,
    profits_block,
    threshold_scan,
    threshold_stationary,
    verify_monotonicity,
)
from .potential import (
    PotentialSolution,
    ReducedSystem,
    RGFactors,
    build_reduced_system,
    invert_reduced,
    normalize_fundamental,
    poisson_residual,
    potential_for_price,
    reanchor,
    rg_factorize,
    solve_poisson,
)
from .reward import (
    AffineReward,
    affine_decomposition,
    average_profit,
    build_reward,
    policy_profit,
    profit_components,
)
from .sensitivity import (
    CriticalPrices,
    SensitivityReport,
    SignConservationReport,
    critical_price_state,
    critical_prices_global,
    performance_difference,
    perturbation_factors,
    price_constant,
    realization_factors,
    sign_conservation_check,
    single_coordinate_difference,
)
from .sim import EventCounts, SimConfig, SimResult, empirical_distribution, simulate

__version__ = "0.1.0"

__all__ = [
    "AffineReward",
    "ChainSolution",
    "ConfigError",
    "ConsistencyError",
    "CriticalPrices",
    "DegeneratePriceError",
    "EventCounts",
    "FULL_SPACE_MAX_M",
    "GateError",
    "Generator",
    "ModelParams",
    "MonotonicityReport",
    "NumericalError",
    "OptimizationResult",
    "POLICY_SPACES",
    "Policy",
    "PotentialSolution",
    "REDUCED_SPACE_MAX_M",
    "RGFactors",
    "ReducedSystem",
    "RegimeError",
    "SensitivityReport",
    "SignConservationReport",
    "SimConfig",
    "SimResult",
    "SleepqError",
    "StateSpace",
    "ThresholdResult",
    "ValidationReport",
    "affine_decomposition",
    "average_profit",
    "build_generator",
    "build_reduced_system",
    "build_reward",
    "canonicalize_policy",
    "check_policy",
    "critical_price_state",
    "critical_prices_global",
    "empirical_distribution",
    "enumerate_policies",
    "evaluate_policies",
    "format_policy",
    "invert_reduced",
    "normalize_fundamental",
    "optimal_extreme_prices",
    "optimize",
    "params_digest",
    "params_from_file",
    "params_to_text",
    "parse_params",
    "parse_policy",
    "performance_difference",
    "perturbation_factors",
    "poisson_residual",
    "policy_profit",
    "policy_space_size",
    "potential_for_price",
    "price_constant",
    "profit_components",
    "profits_block",
    "realization_factors",
    "reanchor",
    "rg_factorize",
    "service_rate",
    "sign_conservation_check",
    "simulate",
    "single_coordinate_difference",
    "solve_poisson",
    "state_space",
    "stationary_closed_form",
    "stationary_numeric",
    "threshold_policy",
    "threshold_scan",
    "threshold_stationary",
    "validate",
    "verify_monotonicity",
]
