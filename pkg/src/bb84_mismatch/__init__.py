"""Tight secret-key-rate bounds for BB84 with detection-efficiency mismatch."""

from .decoy import (
    ChannelModel,
    DecoyConfig,
    DecoyObservations,
    bound_e1q1,
    bound_Q1,
    bound_Y0,
    decoy_keyrate,
    gamma2_upper,
    poisson_gain,
    simulate_error,
    simulate_observations,
    simulate_yield,
    theoretical_limit,
    transmittance,
)
from .errors import (
    ConfigError,
    FeasibilityError,
    NoKeyError,
    SupportError,
    TruncationError,
)
from .keyrates import (
    KeyRateResult,
    detection_imbalance,
    effective_phase_error,
    feasible,
    keyrate_balanced,
    keyrate_discard_optimized,
    keyrate_fung1,
    keyrate_fung2,
    keyrate_general,
    keyrate_two_detectors,
    mismatch_penalty_ratio,
)
from .linalg import (
    SpectralDecomposition,
    binary_entropy,
    eig_decompose,
    psd_project,
    relative_entropy,
)
from .protocol import (
    GammaSet,
    MismatchScenario,
    ObservedRates,
    build_bob_povm,
    build_gamma_set,
    constraint_values,
    depolarizing_state,
    gamma_expectations,
    optimal_attack_state,
    photon_block,
)
from .verifier import (
    MinimizationReport,
    ObjectiveEvaluation,
    channel_G,
    eigenvalues_check,
    error_correction_leak,
    evaluate,
    gradient,
    ignorance_term,
    kkt_orthogonality_check,
    minimize,
    objective,
    pinch_Z,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "ConfigError",
    "DecoyConfig",
    "DecoyObservations",
    "FeasibilityError",
    "GammaSet",
    "KeyRateResult",
    "MinimizationReport",
    "MismatchScenario",
    "NoKeyError",
    "ObjectiveEvaluation",
    "ObservedRates",
    "SpectralDecomposition",
    "SupportError",
    "TruncationError",
    "binary_entropy",
    "bound_Q1",
    "bound_Y0",
    "bound_e1q1",
    "build_bob_povm",
    "build_gamma_set",
    "channel_G",
    "constraint_values",
    "decoy_keyrate",
    "depolarizing_state",
    "detection_imbalance",
    "effective_phase_error",
    "eig_decompose",
    "eigenvalues_check",
    "error_correction_leak",
    "evaluate",
    "feasible",
    "gamma2_upper",
    "gamma_expectations",
    "gradient",
    "ignorance_term",
    "keyrate_balanced",
    "keyrate_discard_optimized",
    "keyrate_fung1",
    "keyrate_fung2",
    "keyrate_general",
    "keyrate_two_detectors",
    "kkt_orthogonality_check",
    "minimize",
    "mismatch_penalty_ratio",
    "objective",
    "optimal_attack_state",
    "photon_block",
    "pinch_Z",
    "poisson_gain",
    "psd_project",
    "relative_entropy",
    "simulate_error",
    "simulate_observations",
    "simulate_yield",
    "theoretical_limit",
    "transmittance",
]
