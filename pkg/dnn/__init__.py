"""
DNN Package - threshold-ReLU source networks, training and calibration statistics.
"""

from .activation import threshold_relu, threshold_relu_grad

from .training import (
    TrainConfig,
    learning_rate_at,
    softmax_cross_entropy,
    network_gradients,
    dataset_loss,
    accuracy,
    train_dnn,
)

from .stats import (
    ActivationStats,
    LayerStats,
    Reservoir,
    percentile_table,
    largest_index_below,
    layer_stats_from_samples,
    collect_activation_stats,
    percentile_stability,
)

__all__ = [
    # Activation
    "threshold_relu",
    "threshold_relu_grad",
    # Training
    "TrainConfig",
    "learning_rate_at",
    "softmax_cross_entropy",
    "network_gradients",
    "dataset_loss",
    "accuracy",
    "train_dnn",
    # Statistics
    "ActivationStats",
    "LayerStats",
    "Reservoir",
    "percentile_table",
    "largest_index_below",
    "layer_stats_from_samples",
    "collect_activation_stats",
    "percentile_stability",
]
