"""
Calibration statistics - percentile tables of every thresholded layer's
pre-activations collected over a calibration set.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from netcore.errors import StatsError
from netcore.network import NetworkSpec, forward
from utils.data_loader import Dataset

logger = logging.getLogger(__name__)

N_PERCENTILES = 101
DEFAULT_RESERVOIR = 1_000_000


def percentile_table(samples: np.ndarray) -> np.ndarray:
    """
    Percentiles P[0..100] with the lower-value estimator
    ``P[j] = sorted[floor(j * (n - 1) / 100)]``.

    Raises:
        StatsError: If ``samples`` is empty
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise StatsError("Cannot build a percentile table from zero samples")
    ordered = np.sort(samples)
    index = (np.arange(N_PERCENTILES) * (samples.size - 1)) // 100
    return ordered[index]


def largest_index_below(percentiles: np.ndarray, mu: float) -> int:
    """Largest j with P[j] <= mu, or -1 when even P[0] exceeds mu."""
    below = np.nonzero(percentiles <= mu)[0]
    return int(below[-1]) if below.size else -1


class Reservoir:
    """Seeded uniform reservoir sample of a stream of values."""

    def __init__(self, capacity: int = DEFAULT_RESERVOIR, seed: int = 0):
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self.values = np.empty(0, dtype=np.float64)
        self.seen = 0

    def add(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=np.float64).ravel()
        free = self.capacity - self.values.size
        if free > 0:
            head = batch[:free]
            self.values = np.concatenate([self.values, head])
            self.seen += head.size
            batch = batch[free:]
        if batch.size == 0:
            return
        positions = self.seen + np.arange(batch.size)
        slots = self.rng.integers(0, positions + 1)
        keep = slots < self.capacity
        self.values[slots[keep]] = batch[keep]
        self.seen += batch.size


@dataclass
class LayerStats:
    """Percentile summary of one layer."""

    layer: int
    mu: float
    percentiles: np.ndarray
    M: int
    d_max: float
    samples: np.ndarray
    coverage: float = 0.0

    @property
    def calibration_percentiles(self) -> np.ndarray:
        """P[0..M], the table handed to the scaling-factor search."""
        return self.percentiles[:self.M + 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layer": self.layer,
            "mu": self.mu,
            "P": self.percentiles.tolist(),
            "M": self.M,
            "d_max": self.d_max,
            "n_samples": int(self.samples.size),
            "coverage_dmax_over_3": self.coverage,
        }


@dataclass
class ActivationStats:
    """Per-layer statistics keyed by layer index."""

    layers: Dict[int, LayerStats] = field(default_factory=dict)

    def __getitem__(self, layer: int) -> LayerStats:
        return self.layers[layer]

    def __contains__(self, layer: int) -> bool:
        return layer in self.layers

    def to_dict(self) -> Dict[str, Any]:
        return {"schema_version": 1, "layers": [self.layers[i].to_dict() for i in sorted(self.layers)]}


def layer_stats_from_samples(layer: int, mu: float, samples: np.ndarray,
                             d_max: Optional[float] = None) -> LayerStats:
    """Build a LayerStats record from raw pre-activation samples."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    table = percentile_table(samples)
    d_max = float(samples.max()) if d_max is None else float(d_max)
    coverage = float(np.mean((samples >= 0) & (samples <= d_max / 3.0))) if d_max > 0 else 1.0
    if mu > d_max:
        logger.warning("Layer %d: mu=%.4g exceeds the observed d_max=%.4g", layer, mu, d_max)
    return LayerStats(layer=layer, mu=float(mu), percentiles=table, M=largest_index_below(table, mu),
                      d_max=d_max, samples=samples, coverage=coverage)


def collect_activation_stats(net: NetworkSpec, data: Dataset, batch_size: int = 256,
                             reservoir_size: int = DEFAULT_RESERVOIR, seed: int = 0,
                             max_samples: Optional[int] = None) -> ActivationStats:
    """
    Run the calibration set through ``net`` and summarise every thresholded layer.

    Args:
        net: Trained network
        data: Calibration set
        batch_size: Forward batch size
        reservoir_size: Per-layer cap on retained raw samples
        seed: Reservoir sampling seed
        max_samples: Use only the first ``max_samples`` inputs (None = all)

    Returns:
        ActivationStats for every thresholded layer

    Raises:
        StatsError: If no samples were collected
    """
    n = len(data) if max_samples is None else min(max_samples, len(data))
    if n == 0:
        raise StatsError("Calibration set is empty")
    thresholded = net.thresholded_indices()
    weighted = net.weighted_indices()
    reservoirs = {i: Reservoir(reservoir_size, seed + i) for i in thresholded}
    d_max = {i: -np.inf for i in thresholded}
    for start in range(0, n, batch_size):
        _, preacts = forward(net, data.x[start:min(start + batch_size, n)])
        for index, z in zip(weighted, preacts):
            if index in reservoirs:
                reservoirs[index].add(z)
                d_max[index] = max(d_max[index], float(z.max()))
    stats = ActivationStats()
    for i in thresholded:
        if reservoirs[i].values.size == 0:
            raise StatsError(f"No pre-activation samples for layer {i}")
        stats.layers[i] = layer_stats_from_samples(i, net.layers[i].mu, reservoirs[i].values, d_max[i])
        logger.info("Layer %d: M=%d d_max=%.4g mu=%.4g coverage=%.3f", i, stats.layers[i].M,
                    stats.layers[i].d_max, stats.layers[i].mu, stats.layers[i].coverage)
    return stats


def percentile_stability(samples: np.ndarray, mu: float, seed: int = 0) -> float:
    """
    Largest gap between the P tables of two disjoint random halves, relative to mu.

    Small values mean the calibration set is large enough for stable tails.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise StatsError("Need at least two samples to compare halves")
    order = np.random.default_rng(seed).permutation(samples.size)
    half = samples.size // 2
    first = percentile_table(samples[order[:half]])
    second = percentile_table(samples[order[half:2 * half]])
    return float(np.max(np.abs(first - second)) / mu)
