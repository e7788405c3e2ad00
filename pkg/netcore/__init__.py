"""
Netcore Package - tensor arithmetic, network description and weight files.
"""

from .errors import (
    SnnCalError,
    ConfigError,
    TrainingError,
    ArtifactError,
    MismatchError,
    InsufficientSamplesError,
    DimensionError,
    StatsError,
    CalibrationError,
    EstimationError,
    ArgumentError,
    EnergyConfigError,
)

from .tensor import (
    as_tensor,
    ensure_finite,
    dense_forward,
    conv2d_forward,
    maxpool2d_forward,
)

from .network import (
    LayerKind,
    LayerSpec,
    NetworkSpec,
    forward,
    layer_input,
    predict,
    build_mlp,
    build_convnet,
)

from .weights_io import (
    save_network,
    load_network,
    save_container,
    load_container,
)

__all__ = [
    # Errors
    "SnnCalError",
    "ConfigError",
    "TrainingError",
    "ArtifactError",
    "MismatchError",
    "InsufficientSamplesError",
    "DimensionError",
    "StatsError",
    "CalibrationError",
    "EstimationError",
    "ArgumentError",
    "EnergyConfigError",
    # Tensor ops
    "as_tensor",
    "ensure_finite",
    "dense_forward",
    "conv2d_forward",
    "maxpool2d_forward",
    # Network
    "LayerKind",
    "LayerSpec",
    "NetworkSpec",
    "forward",
    "layer_input",
    "predict",
    "build_mlp",
    "build_convnet",
    # Weight files
    "save_network",
    "load_network",
    "save_container",
    "load_container",
]
