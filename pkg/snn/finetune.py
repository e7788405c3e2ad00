"""
Surrogate-gradient fine-tuning of a converted spiking network.

Backpropagation through time over the unrolled simulation. The spike
nonlinearity uses the boxcar pseudo-derivative of :func:`surrogate_grad`
with a window that follows each layer's live threshold; the soft reset is
detached from the membrane path. Weights, thresholds and leaks are trained;
beta and the bias shift stay fixed.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from dnn.training import TrainConfig, learning_rate_at, softmax_cross_entropy
from netcore.errors import ArgumentError, TrainingError
from netcore.network import LayerKind
from utils.data_loader import Dataset

from .network import SpikingNetwork, snn_accuracy
from .neuron import surrogate_grad

logger = logging.getLogger(__name__)

MIN_LEAK = 1e-3


@dataclass
class _LayerTape:
    """Per-step tensors of one layer, each of shape (T, N, ...)."""

    inputs: np.ndarray
    u_prev: Optional[np.ndarray] = None
    u_temp: Optional[np.ndarray] = None
    fired: Optional[np.ndarray] = None


def _unroll(snn: SpikingNetwork, x: np.ndarray, T: int) -> Tuple[np.ndarray, Dict[int, _LayerTape]]:
    """
    Layer-major simulation that keeps what the backward pass needs.

    Produces the same spikes as the step-major ``snn_forward``: a layer's
    output sequence depends only on its input sequence.
    """
    net = snn.network
    first = net.weighted_indices()[0]
    readout = net.readout_index
    h = x
    for layer in net.layers[:first]:
        h = layer.apply(h)
    seq = np.broadcast_to(h, (T,) + h.shape)
    tapes: Dict[int, _LayerTape] = {}
    for i in range(first, len(net.layers)):
        layer = net.layers[i]
        if layer.kind == LayerKind.DROPOUT:
            continue
        tape = _LayerTape(inputs=seq)
        tapes[i] = tape
        if i == first:
            z = layer.apply(seq[0])
            drive = np.broadcast_to(z, (T,) + z.shape)
        else:
            drive = np.stack([layer.apply(seq[t]) for t in range(T)])
        if i == readout:
            return drive.sum(axis=0), tapes
        if not layer.is_weighted:
            seq = drive
            continue
        p = snn.neurons[i]
        tape.u_prev = np.zeros_like(drive)
        tape.u_temp = np.zeros_like(drive)
        tape.fired = np.zeros(drive.shape, dtype=bool)
        u = np.zeros(drive.shape[1:])
        for t in range(T):
            tape.u_prev[t] = u
            # delta every step matches the closed form T(z + delta)
            u_temp = p.lam * u + drive[t] + p.delta
            fired = u_temp > p.vth
            tape.u_temp[t] = u_temp
            tape.fired[t] = fired
            u = u_temp - np.where(fired, p.vth, 0.0)
        seq = tape.fired * p.spike_value
    raise ArgumentError("Network has no readout layer")


def sgl_gradients(snn: SpikingNetwork, x: np.ndarray, y: np.ndarray, T: int
                  ) -> Tuple[float, Dict[int, np.ndarray], Dict[int, float], Dict[int, float]]:
    """
    Loss and gradients for one mini-batch of the unrolled network.

    The loss is softmax cross-entropy of the time-averaged readout potential.

    Returns:
        Tuple (loss, weight gradients, threshold gradients, leak gradients),
        the last three keyed by layer index
    """
    net = snn.network
    scores, tapes = _unroll(snn, x, T)
    loss, grad_scores = softmax_cross_entropy(scores / T, y)
    first = net.weighted_indices()[0]
    readout = net.readout_index

    grad_w: Dict[int, np.ndarray] = {}
    grad_vth: Dict[int, float] = {}
    grad_lam: Dict[int, float] = {}
    # Gradient w.r.t. the readout drive is the same at every step
    grad_seq = np.broadcast_to(grad_scores / T, (T,) + grad_scores.shape)

    for i in sorted(tapes, reverse=True):
        layer = net.layers[i]
        tape = tapes[i]
        if i != readout and layer.is_weighted:
            grad_seq, grad_vth[i], grad_lam[i] = _spiking_backward(snn, i, tape, grad_seq)
        if i == first:
            # Analog input is identical at every step
            grad_w[i], _ = layer.backward(tape.inputs[0], grad_seq.sum(axis=0))
            break
        step_grads = [layer.backward(tape.inputs[t], grad_seq[t]) for t in range(T)]
        if layer.is_weighted:
            grad_w[i] = np.sum([gw for gw, _ in step_grads], axis=0)
        grad_seq = np.stack([gx for _, gx in step_grads])
    return loss, grad_w, grad_vth, grad_lam


def _spiking_backward(snn: SpikingNetwork, index: int, tape: _LayerTape,
                      grad_out: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """
    Backward through the IF dynamics; returns (grad of drive sequence, dL/dV^th, dL/dlam).

    A spike of value V^th is taken to have unit derivative w.r.t. the
    membrane inside the surrogate window; the emitted value is beta times
    that spike, so the chain rule carries the factor beta.
    """
    p = snn.neurons[index]
    T = grad_out.shape[0]
    sg = surrogate_grad(tape.u_temp, p.vth)
    fired = tape.fired.astype(np.float64)
    grad_drive = np.zeros_like(grad_out)
    carry = np.zeros(grad_out.shape[1:])
    g_vth = 0.0
    for t in range(T - 1, -1, -1):
        grad_u = p.lam * carry
        grad_u_temp = grad_out[t] * p.beta * sg[t] + grad_u
        g_vth += float(np.sum(grad_out[t] * p.beta * (fired[t] - sg[t]) - fired[t] * grad_u))
        grad_drive[t] = grad_u_temp
        carry = grad_u_temp
    g_lam = float(np.sum(grad_drive * tape.u_prev))
    return grad_drive, g_vth, g_lam


def snn_dataset_loss(snn: SpikingNetwork, data: Dataset, T: int, batch_size: int = 256) -> float:
    """Mean cross-entropy of the time-averaged readout over ``data``."""
    if len(data) == 0:
        raise ArgumentError("Dataset is empty")
    total = 0.0
    for start in range(0, len(data), batch_size):
        xb, yb = data.x[start:start + batch_size], data.y[start:start + batch_size]
        scores, _ = _unroll(snn, xb, T)
        loss, _ = softmax_cross_entropy(scores / T, yb)
        total += loss * len(yb)
    return total / len(data)


def finetune_sgl(snn: SpikingNetwork, data: Dataset, T: int, cfg: TrainConfig,
                 history: Optional[List[Dict[str, Any]]] = None,
                 on_epoch: Optional[Callable[[Dict[str, Any]], None]] = None) -> SpikingNetwork:
    """
    Jointly fine-tune weights, thresholds and leaks of a copy of ``snn``.

    Args:
        snn: Converted spiking network (left untouched)
        data: Training set
        T: Simulation length
        cfg: Optimisation settings; ``dropout`` is ignored
        history: Optional list receiving one record per epoch
        on_epoch: Optional callback receiving the same records

    Returns:
        Fine-tuned spiking network

    Raises:
        ArgumentError: If T < 1 or the data set is empty
        TrainingError: If the loss becomes non-finite
    """
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    if len(data) == 0:
        raise ArgumentError("Training data is empty")
    snn = snn.copy()
    net = snn.network
    rng = np.random.default_rng(cfg.seed)
    velocity = {i: np.zeros_like(net.layers[i].weight) for i in net.weighted_indices()}
    vth_velocity = {i: 0.0 for i in snn.spiking_indices()}
    lam_velocity = {i: 0.0 for i in snn.spiking_indices()}

    for epoch in range(cfg.epochs):
        lr = learning_rate_at(cfg, epoch)
        losses = []
        for xb, yb in data.batches(cfg.batch_size, rng):
            loss, grad_w, grad_vth, grad_lam = sgl_gradients(snn, xb, yb, T)
            if not math.isfinite(loss):
                raise TrainingError("SNN fine-tuning loss became non-finite", epoch=epoch)
            losses.append(loss * len(yb))
            for i, g in grad_w.items():
                velocity[i] = cfg.momentum * velocity[i] + g
                net.layers[i].weight = net.layers[i].weight - lr * velocity[i]
            for i in snn.spiking_indices():
                p = snn.neurons[i]
                vth_velocity[i] = cfg.momentum * vth_velocity[i] + grad_vth[i]
                lam_velocity[i] = cfg.momentum * lam_velocity[i] + grad_lam[i]
                p.vth = max(p.vth - lr * vth_velocity[i], cfg.min_threshold)
                p.lam = min(max(p.lam - lr * lam_velocity[i], MIN_LEAK), 1.0)
        epoch_loss = float(np.sum(losses) / len(data))
        if not math.isfinite(epoch_loss):
            raise TrainingError("SNN fine-tuning loss became non-finite", epoch=epoch)
        try:
            train_accuracy = snn_accuracy(snn, data, T)
        except FloatingPointError as e:
            raise TrainingError(f"SNN fine-tuning diverged: {e}", epoch=epoch) from e
        record = {
            "epoch": epoch,
            "loss": epoch_loss,
            "accuracy": train_accuracy,
            "learning_rate": lr,
            "vth": {str(i): p.vth for i, p in snn.neurons.items()},
            "lam": {str(i): p.lam for i, p in snn.neurons.items()},
            "surrogate_window": "2 * live V^th",
        }
        logger.info("SNN epoch %d: loss=%.4f acc=%.3f lr=%.4g", epoch, epoch_loss, record["accuracy"], lr)
        if history is not None:
            history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return snn
