"""
Sample-based distributions and the bootstrap used to put error bars on every
plug-in estimate.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from netcore.errors import ArgumentError, InsufficientSamplesError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10_000
DEFAULT_RESAMPLES = 200


@dataclass
class EmpiricalDistribution:
    """
    Samples of a pre-activation distribution.

    ``tag`` records where the samples came from (``uniform``, ``exponential``
    or ``custom``) with the generating parameters in ``params``.
    """

    samples: np.ndarray
    tag: str = "custom"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.samples)):
            raise ArgumentError("Distribution samples must be finite")

    def __len__(self) -> int:
        return int(self.samples.size)

    def require(self, minimum: int = MIN_SAMPLES) -> np.ndarray:
        """
        Return the samples, enforcing the estimator sample floor.

        Raises:
            InsufficientSamplesError: If fewer than ``minimum`` samples are held
        """
        if self.samples.size < minimum:
            raise InsufficientSamplesError(
                f"{self.samples.size} samples is below the estimator floor of {minimum}")
        return self.samples

    @classmethod
    def uniform(cls, mu: float, n: int, seed: int = 0) -> "EmpiricalDistribution":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(0.0, mu, size=n), "uniform", {"mu": mu})

    @classmethod
    def exponential(cls, rate: float, n: int, seed: int = 0) -> "EmpiricalDistribution":
        """Exponential samples with the given rate (mean 1/rate)."""
        if not rate > 0:
            raise ArgumentError(f"rate must be positive, got {rate}")
        rng = np.random.default_rng(seed)
        return cls(rng.exponential(1.0 / rate, size=n), "exponential", {"rate": rate})

    def describe(self) -> Dict[str, Any]:
        return {"tag": self.tag, "params": dict(self.params), "n": len(self)}


DistLike = Union[EmpiricalDistribution, np.ndarray]


def as_distribution(dist: DistLike) -> EmpiricalDistribution:
    return dist if isinstance(dist, EmpiricalDistribution) else EmpiricalDistribution(dist)


@dataclass
class Estimate:
    """Point estimate with its Monte-Carlo and bootstrap uncertainty."""

    value: float
    mc_se: float
    boot_se: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    n: int = 0

    @property
    def se(self) -> float:
        """Bootstrap standard error when available, else the analytic one."""
        return self.boot_se if self.boot_se is not None else self.mc_se

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "mc_se": self.mc_se,
            "boot_se": self.boot_se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n,
        }


def bootstrap_ci(contributions: np.ndarray, n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                 confidence: float = 0.95) -> Estimate:
    """
    Estimate the mean of per-sample ``contributions`` with a seeded bootstrap.

    Every estimator in this package is an average of per-sample terms, so
    resampling the terms is equivalent to resampling the raw data.

    Args:
        contributions: Per-sample terms
        n_resamples: Bootstrap resamples (0 skips the bootstrap)
        seed: Resampling seed
        confidence: Two-sided confidence level of the percentile interval

    Returns:
        Estimate of the mean
    """
    contributions = np.asarray(contributions, dtype=np.float64).ravel()
    n = contributions.size
    if n == 0:
        raise InsufficientSamplesError("Cannot estimate from zero samples")
    value = float(contributions.mean())
    mc_se = float(contributions.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if n_resamples <= 0:
        return Estimate(value=value, mc_se=mc_se, n=n)
    rng = np.random.default_rng(seed)
    means = np.empty(n_resamples)
    for k in range(n_resamples):
        means[k] = contributions[rng.integers(0, n, size=n)].mean()
    tail = (1.0 - confidence) / 2.0
    lo, hi = np.quantile(means, [tail, 1.0 - tail])
    return Estimate(value=value, mc_se=mc_se, boot_se=float(means.std(ddof=1)),
                    ci_low=float(lo), ci_high=float(hi), n=n)


def difference_estimate(first: np.ndarray, second: np.ndarray, paired: bool,
                        n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0) -> Estimate:
    """
    Estimate ``mean(first) - mean(second)``.

    Paired terms (same underlying samples) are differenced before the
    bootstrap; independent ones combine their errors in quadrature.
    """
    if paired:
        if first.shape != second.shape:
            raise ArgumentError("Paired estimates need equally many terms")
        return bootstrap_ci(first - second, n_resamples, seed)
    a = bootstrap_ci(first, n_resamples, seed)
    b = bootstrap_ci(second, n_resamples, seed + 1)
    boot_se = None if a.boot_se is None else float(np.hypot(a.boot_se, b.boot_se))
    value = a.value - b.value
    ci = (None, None) if boot_se is None else (value - 1.96 * boot_se, value + 1.96 * boot_se)
    return Estimate(value=value, mc_se=float(np.hypot(a.mc_se, b.mc_se)), boot_se=boot_se,
                    ci_low=ci[0], ci_high=ci[1], n=min(a.n, b.n))
