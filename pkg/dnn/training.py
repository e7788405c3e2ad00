"""
Threshold-ReLU DNN training - plain SGD over softmax cross-entropy with a
step learning-rate schedule. Weights and every layer threshold mu are trained.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from netcore.errors import ArgumentError, TrainingError
from netcore.network import LayerKind, NetworkSpec, predict
from utils.data_loader import Dataset

from .activation import threshold_relu_grad

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Optimisation settings shared by DNN training and SNN fine-tuning."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(30, ge=0)
    learning_rate: float = Field(0.01, ge=0.0)
    decay_factor: float = Field(0.1, gt=0.0, le=1.0)
    milestones: Tuple[float, ...] = (0.6, 0.8, 0.9)
    batch_size: int = Field(32, ge=1)
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    momentum: float = Field(0.0, ge=0.0, lt=1.0)
    min_threshold: float = Field(1e-3, gt=0.0)
    seed: int = 0

    @field_validator("milestones")
    @classmethod
    def _increasing(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not 0.0 < m < 1.0 for m in value):
            raise ValueError("milestones must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("milestones must be strictly increasing")
        return value


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Step schedule: multiply by ``decay_factor`` at every passed milestone."""
    passed = sum(1 for m in cfg.milestones if epoch >= m * cfg.epochs)
    return cfg.learning_rate * cfg.decay_factor ** passed


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean softmax cross-entropy and its gradient w.r.t. the logits.

    Args:
        logits: (N, classes)
        labels: (N,) integer class labels

    Returns:
        Tuple (loss, grad_logits)
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    n = len(labels)
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _forward_cached(net: NetworkSpec, x: np.ndarray, rng: Optional[np.random.Generator]):
    """Forward pass keeping each layer's input and pre-activation (or dropout mask)."""
    cache = []
    h = x
    for layer in net.layers:
        if layer.kind == LayerKind.DROPOUT:
            mask = None
            if rng is not None and layer.rate > 0:
                mask = (rng.random(h.shape) >= layer.rate) / (1.0 - layer.rate)
                h = h * mask
            cache.append((None, mask))
            continue
        z = layer.apply(h)
        cache.append((h, z))
        h = np.clip(z, 0.0, layer.mu) if layer.is_thresholded else z
    return h, cache


def network_gradients(net: NetworkSpec, x: np.ndarray, y: np.ndarray,
                      rng: Optional[np.random.Generator] = None) -> Tuple[float, Dict[int, np.ndarray], Dict[int, float]]:
    """
    Loss and gradients for one mini-batch.

    Args:
        net: Network to differentiate
        x: Batch of inputs
        y: Batch of labels
        rng: Dropout generator; None evaluates without dropout

    Returns:
        Tuple (loss, weight gradients by layer index, mu gradients by layer index)
    """
    logits, cache = _forward_cached(net, x, rng)
    loss, grad = softmax_cross_entropy(logits, y)
    grad_w: Dict[int, np.ndarray] = {}
    grad_mu: Dict[int, float] = {}
    first_weighted = net.weighted_indices()[0]
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        layer_in, aux = cache[index]
        if layer.kind == LayerKind.DROPOUT:
            if aux is not None:
                grad = grad * aux
            continue
        if layer.is_thresholded:
            d_dx, d_dmu = threshold_relu_grad(aux, layer.mu)
            grad_mu[index] = float(np.sum(grad * d_dmu))
            grad = grad * d_dx
        if index == first_weighted and layer.is_weighted:
            # Input gradient is not needed below the first weighted layer
            grad_w[index], _ = layer.backward(layer_in, grad)
            break
        gw, grad = layer.backward(layer_in, grad)
        if gw is not None:
            grad_w[index] = gw
    return loss, grad_w, grad_mu


def dataset_loss(net: NetworkSpec, data: Dataset, batch_size: int = 512) -> float:
    """Mean cross-entropy of ``net`` over ``data`` (inference mode)."""
    total = 0.0
    for start in range(0, len(data), batch_size):
        logits, _ = _forward_cached(net, data.x[start:start + batch_size], None)
        loss, _ = softmax_cross_entropy(logits, data.y[start:start + batch_size])
        total += loss * len(logits)
    return total / len(data)


def accuracy(net: NetworkSpec, data: Dataset) -> float:
    """Fraction of correctly classified samples."""
    if len(data) == 0:
        return 0.0
    return float(np.mean(predict(net, data.x) == data.y))


def _parameters_finite(net: NetworkSpec) -> bool:
    weights_ok = all(np.all(np.isfinite(net.layers[i].weight)) for i in net.weighted_indices())
    return weights_ok and all(math.isfinite(mu) for mu in net.mus().values())


def train_dnn(net: NetworkSpec, data: Dataset, cfg: TrainConfig,
              history: Optional[List[Dict[str, Any]]] = None,
              on_epoch: Optional[Callable[[Dict[str, Any]], None]] = None) -> NetworkSpec:
    """
    Train weights and thresholds of a copy of ``net``.

    Args:
        net: Initial network (left untouched)
        data: Training set
        cfg: Optimisation settings
        history: Optional list receiving one record per epoch
        on_epoch: Optional callback receiving the same records

    Returns:
        Trained network

    Raises:
        ArgumentError: If the data set is empty or shapes disagree
        TrainingError: If the loss becomes non-finite
    """
    if len(data) == 0:
        raise ArgumentError("Training data is empty")
    if data.input_shape != net.input_shape:
        raise ArgumentError(f"Data shape {data.input_shape} does not match network input {net.input_shape}")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    velocity = {i: np.zeros_like(net.layers[i].weight) for i in net.weighted_indices()}
    mu_velocity = {i: 0.0 for i in net.thresholded_indices()}

    for epoch in range(cfg.epochs):
        lr = learning_rate_at(cfg, epoch)
        losses = []
        for xb, yb in data.batches(cfg.batch_size, rng):
            loss, grad_w, grad_mu = network_gradients(net, xb, yb, rng)
            if not math.isfinite(loss):
                raise TrainingError("DNN training loss became non-finite", epoch=epoch)
            losses.append(loss * len(yb))
            for i, g in grad_w.items():
                velocity[i] = cfg.momentum * velocity[i] + g
                net.layers[i].weight = net.layers[i].weight - lr * velocity[i]
            for i, g in grad_mu.items():
                mu_velocity[i] = cfg.momentum * mu_velocity[i] + g
                net.layers[i].mu = max(net.layers[i].mu - lr * mu_velocity[i], cfg.min_threshold)
        epoch_loss = float(np.sum(losses) / len(data))
        if not math.isfinite(epoch_loss):
            raise TrainingError("DNN training loss became non-finite", epoch=epoch)
        if not _parameters_finite(net):
            raise TrainingError("DNN weights or thresholds became non-finite", epoch=epoch)
        try:
            train_accuracy = accuracy(net, data)
        except FloatingPointError as e:
            raise TrainingError(f"DNN training diverged: {e}", epoch=epoch) from e
        record = {
            "epoch": epoch,
            "loss": epoch_loss,
            "accuracy": train_accuracy,
            "learning_rate": lr,
            "mu": {str(i): mu for i, mu in net.mus().items()},
        }
        logger.info("DNN epoch %d: loss=%.4f acc=%.3f lr=%.4g", epoch, record["loss"], record["accuracy"], lr)
        if history is not None:
            history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return net
