"""
Layer-level conversion error measured by simulation, and the per-layer,
per-T error report combining it with the plug-in estimates.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from netcore.errors import ArgumentError
from netcore.network import NetworkSpec, forward, layer_input
from snn.network import SpikingNetwork
from snn.neuron import MembraneState, integrate_and_fire
from utils.data_loader import Dataset

from .distribution import DEFAULT_RESAMPLES, EmpiricalDistribution, bootstrap_ci
from .estimators import (
    compute_g_all,
    delta_alpha_beta_terms,
    empirical_delta,
    h_terms,
    k_terms,
    mass_above_mu,
    predicted_delta,
    t_prime,
)

logger = logging.getLogger(__name__)


def _check_layer(dnn: NetworkSpec, snn: SpikingNetwork, layer: int) -> None:
    if not 0 <= layer < len(dnn.layers):
        raise ArgumentError(f"Layer index {layer} out of range 0..{len(dnn.layers) - 1}")
    if not dnn.layers[layer].is_thresholded or layer not in snn.neurons:
        raise ArgumentError(f"Layer {layer} is not a thresholded layer of both networks")


def estimate_delta_simulated(dnn: NetworkSpec, snn: SpikingNetwork, data: Dataset, layer: int, T: int,
                             batch_size: int = 256) -> float:
    """
    Mean DNN minus SNN output of one layer, both driven by the DNN's input to it.

    Args:
        dnn: Source network
        snn: Spiking network with the same layer layout
        data: Inputs
        layer: Thresholded layer index
        T: Simulation length

    Returns:
        Mean over inputs and neurons of (clipped DNN activation - SNN average output)

    Raises:
        ArgumentError: If the layer is out of range or not thresholded, or data is empty
    """
    _check_layer(dnn, snn, layer)
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    if len(data) == 0:
        raise ArgumentError("Dataset is empty")
    mu = dnn.layers[layer].mu
    p = snn.neurons[layer]
    total, count = 0.0, 0
    for start in range(0, len(data), batch_size):
        h = layer_input(dnn, data.x[start:start + batch_size], layer)
        dnn_out = np.clip(dnn.layers[layer].apply(h), 0.0, mu)
        drive = snn.layers[layer].apply(h) + p.delta
        state = MembraneState.zeros(drive.shape)
        snn_out = np.zeros_like(drive)
        for _ in range(T):
            _, spikes, state = integrate_and_fire(state, drive, p.vth, p.beta, p.lam)
            snn_out += spikes
        total += float(np.sum(dnn_out - snn_out / T))
        count += dnn_out.size
    return total / count


def layer_preactivations(net: NetworkSpec, data: Dataset, layer: int, batch_size: int = 512) -> np.ndarray:
    """Flattened inference pre-activations of one weighted layer over ``data``."""
    position = net.weighted_indices().index(layer)
    chunks = []
    for start in range(0, len(data), batch_size):
        _, preacts = forward(net, data.x[start:start + batch_size])
        chunks.append(preacts[position].ravel())
    return np.concatenate(chunks)


@dataclass
class ErrorReport:
    """Conversion-error quantities of one layer at one T."""

    layer: int
    T: int
    mu: float
    alpha: float
    beta: float
    K: float
    g: List[float]
    h: float
    h_prime: float
    T_prime: float
    delta_empirical: float
    delta_predicted: float
    delta_alpha_beta: float
    delta_simulated: Optional[float]
    mass_above_mu: float
    ci: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.K <= 1.0:
            raise ArgumentError(f"K must lie in [0, 1], got {self.K}")
        if any(g < 0 for g in self.g) or sum(self.g) > 1.0 + 1e-12:
            raise ArgumentError("g must be non-negative and sum to at most 1")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AnalysisReport:
    """Error reports for every analysed (layer, T) pair."""

    records: List[ErrorReport] = field(default_factory=list)
    n_samples: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": 1,
            "T_prime_definition": "(T - 1/2) * mu / T",
            "n_samples": {str(k): v for k, v in sorted(self.n_samples.items())},
            "records": [r.to_dict() for r in self.records],
        }

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (layer, T, quantity)."""
        rows = []
        for r in self.records:
            values = {
                "K": r.K, "h": r.h, "h_prime": r.h_prime, "T_prime": r.T_prime,
                "delta_empirical": r.delta_empirical, "delta_predicted": r.delta_predicted,
                "delta_alpha_beta": r.delta_alpha_beta, "delta_simulated": r.delta_simulated,
                "mass_above_mu": r.mass_above_mu,
            }
            values.update({f"g_{i + 1}": g for i, g in enumerate(r.g)})
            for name, value in values.items():
                ci = r.ci.get(name, {})
                rows.append({"layer": r.layer, "T": r.T, "quantity": name, "value": value,
                             "ci_low": ci.get("ci_low"), "ci_high": ci.get("ci_high")})
        return pd.DataFrame(rows, columns=["layer", "T", "quantity", "value", "ci_low", "ci_high"])


def layer_error_report(samples: np.ndarray, mu: float, T: int, alpha: float = 1.0, beta: float = 1.0,
                       vth: Optional[float] = None, delta: float = 0.0,
                       delta_simulated: Optional[float] = None, layer: int = -1,
                       n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0) -> ErrorReport:
    """
    Error report from one layer's pre-activation samples.

    The SNN layer sees the same inputs as the DNN layer, so ``samples`` serve
    as both the d and the s distribution.
    """
    dist = EmpiricalDistribution(samples)
    s = dist.require()
    cut = alpha * mu
    K = bootstrap_ci(k_terms(s, mu), n_resamples, seed)
    h = bootstrap_ci(h_terms(s, T, mu, biased=True), n_resamples, seed + 1)
    h_prime = bootstrap_ci(h_terms(s, T, cut, biased=False), n_resamples, seed + 2)
    measured = empirical_delta(dist, dist, mu, T, vth=vth, beta=beta, delta=delta,
                               n_resamples=n_resamples, seed=seed + 3)
    dnn_terms, snn_terms = delta_alpha_beta_terms(s, s, mu, alpha, beta, T)
    ab = bootstrap_ci(dnn_terms - snn_terms, n_resamples, seed + 4)
    report = ErrorReport(
        layer=layer, T=T, mu=mu, alpha=alpha, beta=beta,
        K=K.value, g=compute_g_all(dist, T, mu).tolist(), h=h.value, h_prime=h_prime.value,
        T_prime=t_prime(T, mu),
        delta_empirical=measured.value,
        delta_predicted=predicted_delta(K.value, h.value, mu),
        delta_alpha_beta=ab.value,
        delta_simulated=delta_simulated,
        mass_above_mu=mass_above_mu(dist, mu),
        ci={"K": K.to_dict(), "h": h.to_dict(), "h_prime": h_prime.to_dict(),
            "delta_empirical": measured.to_dict(), "delta_alpha_beta": ab.to_dict()},
    )
    logger.info("Layer %d T=%d: K=%.4f h=%.4f h'=%.4f delta=%.4g (pred %.4g)", layer, T, report.K,
                report.h, report.h_prime, report.delta_empirical, report.delta_predicted)
    return report


def build_error_report(dnn: NetworkSpec, snn: SpikingNetwork, data: Dataset, T_values: Sequence[int],
                       n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                       simulate: bool = True) -> AnalysisReport:
    """
    Error reports for every thresholded layer and every T in ``T_values``.

    The spiking layer's threshold, scale and bias shift are taken from ``snn``;
    alpha is recovered as V^th / mu.

    Raises:
        InsufficientSamplesError: If a layer yields fewer samples than the floor
    """
    report = AnalysisReport()
    for layer in dnn.thresholded_indices():
        samples = layer_preactivations(dnn, data, layer)
        report.n_samples[layer] = int(samples.size)
        mu = float(dnn.layers[layer].mu)
        p = snn.neurons[layer]
        for T in T_values:
            simulated = estimate_delta_simulated(dnn, snn, data, layer, T) if simulate else None
            report.records.append(layer_error_report(
                samples, mu, T, alpha=p.vth / mu, beta=p.beta, vth=p.vth, delta=p.delta,
                delta_simulated=simulated, layer=layer, n_resamples=n_resamples, seed=seed))
    return report
