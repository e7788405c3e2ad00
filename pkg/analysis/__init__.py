"""
Analysis Package - plug-in estimates of the DNN to SNN conversion error.
"""

from .distribution import (
    MIN_SAMPLES,
    DEFAULT_RESAMPLES,
    EmpiricalDistribution,
    Estimate,
    as_distribution,
    bootstrap_ci,
    difference_estimate,
)

from .estimators import (
    t_prime,
    compute_K,
    compute_g,
    compute_g_all,
    compute_h,
    predicted_delta,
    predicted_delta_alpha_beta,
    empirical_delta,
    mass_above_mu,
)

from .simulated import (
    ErrorReport,
    AnalysisReport,
    estimate_delta_simulated,
    layer_preactivations,
    layer_error_report,
    build_error_report,
)

__all__ = [
    # Distributions
    "MIN_SAMPLES",
    "DEFAULT_RESAMPLES",
    "EmpiricalDistribution",
    "Estimate",
    "as_distribution",
    "bootstrap_ci",
    "difference_estimate",
    # Estimators
    "t_prime",
    "compute_K",
    "compute_g",
    "compute_g_all",
    "compute_h",
    "predicted_delta",
    "predicted_delta_alpha_beta",
    "empirical_delta",
    "mass_above_mu",
    # Simulation and reports
    "ErrorReport",
    "AnalysisReport",
    "estimate_delta_simulated",
    "layer_preactivations",
    "layer_error_report",
    "build_error_report",
]
