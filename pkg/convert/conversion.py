"""
DNN to SNN conversion.

Three ways of choosing each layer's spiking parameters:

- naive:         V^th = mu, beta = 1, no bias shift
- max_act_bias:  V^th = d_max (largest observed pre-activation), delta = V^th / 2T
- scaled:        V^th = alpha * mu with (alpha, beta) from the percentile search
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import pandas as pd

from dnn.stats import ActivationStats
from netcore.errors import ArgumentError, CalibrationError
from netcore.network import NetworkSpec
from snn.network import NeuronParams, SpikingNetwork

from .scaling import compute_loss, find_scaling_factors, loss_landscape

logger = logging.getLogger(__name__)


class ConversionMode(str, Enum):
    NAIVE = "naive"
    MAX_ACT_BIAS = "max_act_bias"
    SCALED = "scaled"


@dataclass
class LayerPlan:
    """Calibration outcome for one thresholded layer."""

    layer: int
    mode: ConversionMode
    alpha: float
    beta: float
    vth: float
    delta: float
    loss: Optional[float]
    mu: float
    d_max: float


@dataclass
class ConversionPlan:
    """Per-layer spiking parameters chosen for ``time_steps`` steps."""

    time_steps: int
    mode: ConversionMode
    layers: Dict[int, LayerPlan] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": 1,
            "time_steps": self.time_steps,
            "mode": self.mode.value,
            "layers": [{**asdict(lp), "mode": lp.mode.value} for _, lp in sorted(self.layers.items())],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ConversionPlan":
        plan = cls(time_steps=int(payload["time_steps"]), mode=ConversionMode(payload["mode"]))
        for entry in payload["layers"]:
            lp = LayerPlan(**{**entry, "mode": ConversionMode(entry["mode"])})
            plan.layers[lp.layer] = lp
        return plan


def _plan_layer(index: int, mu: float, stats, T: int, mode: ConversionMode) -> LayerPlan:
    P = stats.calibration_percentiles
    if mode == ConversionMode.NAIVE:
        alpha, beta, vth, delta = 1.0, 1.0, mu, 0.0
    elif mode == ConversionMode.MAX_ACT_BIAS:
        vth = stats.d_max
        if not vth > 0:
            logger.warning("Layer %d never activates (d_max=%.4g); falling back to V^th = mu", index, vth)
            vth = mu
        alpha, beta, delta = vth / mu, 1.0, vth / (2 * T)
    else:
        pair = find_scaling_factors(P, mu, T)
        alpha, beta, vth, delta = pair.alpha, pair.beta, pair.alpha * mu, 0.0
    loss = compute_loss(P, mu, alpha, beta, T) if P.size else None
    return LayerPlan(layer=index, mode=mode, alpha=alpha, beta=beta, vth=vth, delta=delta,
                     loss=loss, mu=mu, d_max=stats.d_max)


def convert_dnn_to_snn(net: NetworkSpec, stats: ActivationStats, T: int,
                       mode: ConversionMode = ConversionMode.SCALED) -> tuple[SpikingNetwork, ConversionPlan]:
    """
    Copy ``net`` into a spiking network with per-layer parameters set by ``mode``.

    Args:
        net: Trained threshold-ReLU network
        stats: Calibration statistics collected from ``net``
        T: Number of time steps the SNN will run for
        mode: Conversion mode

    Returns:
        Tuple (spiking network, conversion plan)

    Raises:
        ArgumentError: If T < 1
        CalibrationError: If a thresholded layer has no statistics
    """
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    mode = ConversionMode(mode)
    plan = ConversionPlan(time_steps=T, mode=mode)
    neurons: Dict[int, NeuronParams] = {}
    for index in net.thresholded_indices():
        if index not in stats:
            raise CalibrationError(f"No activation statistics for layer {index}")
        mu = float(net.layers[index].mu)
        lp = _plan_layer(index, mu, stats[index], T, mode)
        plan.layers[index] = lp
        neurons[index] = NeuronParams(vth=lp.vth, beta=lp.beta, lam=1.0, delta=lp.delta)
        logger.info("Layer %d (%s): alpha=%.4f beta=%.2f V^th=%.4g delta=%.4g",
                    index, mode.value, lp.alpha, lp.beta, lp.vth, lp.delta)
    return SpikingNetwork(net.copy(), neurons, time_steps=T), plan


def plan_landscape(plan: ConversionPlan, stats: ActivationStats, beta_step: int = 5) -> pd.DataFrame:
    """Loss landscape of every layer, stacked with a ``layer`` column."""
    frames = []
    for index, lp in sorted(plan.layers.items()):
        frame = loss_landscape(stats[index].calibration_percentiles, lp.mu, plan.time_steps, beta_step)
        frame.insert(0, "layer", index)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["layer", "alpha", "beta", "loss"])
    return pd.concat(frames, ignore_index=True)


def _consumer(net: NetworkSpec, index: int) -> Optional[int]:
    for j in range(index + 1, len(net.layers)):
        if net.layers[j].is_weighted:
            return j
    return None


def absorb_beta(snn: SpikingNetwork) -> SpikingNetwork:
    """
    Fold every hidden layer's beta into the weights of the layer consuming its spikes.

    Max pooling and dropout between the two layers commute with a non-negative
    scale, so the input-to-score map is unchanged. Returns a new network with
    beta = 1 everywhere.
    """
    snn = snn.copy()
    net = snn.network
    for index in snn.spiking_indices():
        p = snn.neurons[index]
        if p.beta == 1.0:
            continue
        target = _consumer(net, index)
        if target is None:
            raise CalibrationError(f"Layer {index} has no consuming layer to absorb beta into")
        net.layers[target].weight = net.layers[target].weight * p.beta
        p.beta = 1.0
    return snn
