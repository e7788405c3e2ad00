"""
Convert Package - DNN to SNN threshold calibration and conversion.
"""

from .scaling import (
    BETA_GRID,
    ScalePair,
    compute_loss,
    find_scaling_factors,
    loss_landscape,
    split_calibration_diagnostic,
)

from .conversion import (
    ConversionMode,
    LayerPlan,
    ConversionPlan,
    convert_dnn_to_snn,
    plan_landscape,
    absorb_beta,
)

__all__ = [
    # Scaling search
    "BETA_GRID",
    "ScalePair",
    "compute_loss",
    "find_scaling_factors",
    "loss_landscape",
    "split_calibration_diagnostic",
    # Conversion
    "ConversionMode",
    "LayerPlan",
    "ConversionPlan",
    "convert_dnn_to_snn",
    "plan_landscape",
    "absorb_beta",
]
