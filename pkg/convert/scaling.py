"""
Layer-wise threshold (alpha) and output (beta) scaling search.

The SNN staircase with threshold ``alpha * mu`` and spike value
``beta * alpha * mu`` is compared against the clipped DNN activation at each
percentile of the layer's pre-activations. ``compute_loss`` sums the signed
residuals; ``find_scaling_factors`` scans alpha over the percentiles and beta
over a 0.01 grid on [0, 2] for the smallest absolute residual.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from dnn.stats import largest_index_below, percentile_table
from netcore.errors import ArgumentError, CalibrationError

logger = logging.getLogger(__name__)

BETA_GRID = np.arange(201) / 100.0


@dataclass(frozen=True)
class ScalePair:
    """Threshold scale ``alpha`` in (0, 1] and output scale ``beta`` in [0, 2]."""

    alpha: float = 1.0
    beta: float = 1.0

    def to_dict(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta}


def _check(mu: float, T: int) -> None:
    if not mu > 0:
        raise ArgumentError(f"mu must be positive, got {mu}")
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")


def _loss_terms(P: np.ndarray, mu: float, alpha: float, T: int):
    """
    Split the residual into ``A - alpha * beta * mu * C``.

    ``A`` sums the DNN side (p below mu, mu above it) and ``C`` counts staircase
    steps in units of ``alpha * beta * mu``. Negative percentiles sit on the
    flat part of both curves and contribute nothing.
    """
    cut = alpha * mu
    p = P[P > 0]
    seg1 = p[p <= cut]
    seg2 = p[(p > cut) & (p <= mu)]
    n_seg3 = int(np.count_nonzero(p > mu))
    # Half-open steps [j*cut/T, (j+1)*cut/T); p == cut closes the last one
    j = np.minimum(np.floor(seg1 * T / cut), T - 1)
    A = float(seg1.sum() + seg2.sum() + n_seg3 * mu)
    C = float(j.sum() / T + seg2.size + n_seg3)
    return A, C


def compute_loss(P: Sequence[float], mu: float, alpha: float, beta: float, T: int) -> float:
    """
    Signed staircase residual summed over the percentile values.

    Args:
        P: Non-decreasing percentile values
        mu: DNN threshold of the layer
        alpha: Threshold scale (V^th = alpha * mu)
        beta: Output scale (spike value = beta * V^th)
        T: Number of time steps

    Returns:
        Sum of DNN minus SNN activation over the percentiles
    """
    _check(mu, T)
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    A, C = _loss_terms(np.asarray(P, dtype=np.float64), mu, alpha, T)
    return A - alpha * beta * mu * C


def find_scaling_factors(P: Sequence[float], mu: float, T: int,
                         betas: np.ndarray = BETA_GRID) -> ScalePair:
    """
    Grid search for the (alpha, beta) pair with the smallest absolute loss.

    Candidates are visited in ascending percentile order, then ascending beta,
    starting from the incumbent (1, 1); only a strictly smaller |loss|
    replaces the incumbent. Non-positive percentiles propose no alpha.

    Args:
        P: Percentile table restricted to indices 0..M
        mu: DNN threshold of the layer
        T: Number of time steps
        betas: Ascending beta grid

    Returns:
        The selected ScalePair

    Raises:
        CalibrationError: If ``P`` is empty
    """
    _check(mu, T)
    P = np.asarray(P, dtype=np.float64)
    if P.size == 0:
        raise CalibrationError("Cannot search scaling factors over an empty percentile table")
    best = ScalePair(1.0, 1.0)
    best_loss = abs(compute_loss(P, mu, 1.0, 1.0, T))
    for p in P:
        if p <= 0:
            continue
        alpha = float(p / mu)
        A, C = _loss_terms(P, mu, alpha, T)
        losses = np.abs(A - alpha * betas * mu * C)
        k = int(np.argmin(losses))
        if losses[k] < best_loss:
            best, best_loss = ScalePair(alpha, float(betas[k])), float(losses[k])
    if best.beta == 0.0:
        logger.warning("Selected beta=0 (alpha=%.4g): the layer will emit only zero-valued spikes", best.alpha)
    return best


def loss_landscape(P: Sequence[float], mu: float, T: int, beta_step: int = 5,
                   alphas: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """
    Long-format (alpha, beta, loss) table for plotting the search surface.

    Args:
        P: Percentile table
        mu: DNN threshold
        T: Number of time steps
        beta_step: Keep every ``beta_step``-th point of the beta grid
        alphas: Alpha values to sample (defaults to the distinct positive P/mu)
    """
    _check(mu, T)
    P = np.asarray(P, dtype=np.float64)
    if alphas is None:
        alphas = np.unique(P[P > 0] / mu)
    betas = BETA_GRID[::beta_step]
    rows = []
    for alpha in alphas:
        A, C = _loss_terms(P, mu, float(alpha), T)
        for beta in betas:
            rows.append({"alpha": float(alpha), "beta": float(beta), "loss": A - alpha * beta * mu * C})
    return pd.DataFrame(rows, columns=["alpha", "beta", "loss"])


def split_calibration_diagnostic(samples: np.ndarray, mu: float, T: int, seed: int = 0) -> Dict[str, Any]:
    """
    Fit (alpha, beta) on one random half of the samples and score the other half.

    A held-out loss much larger than the fitted one signals that the search
    over-fits the percentile table it proposes alpha from.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise CalibrationError("Need at least two samples for a split calibration")
    order = np.random.default_rng(seed).permutation(samples.size)
    half = samples.size // 2
    fit_P = percentile_table(samples[order[:half]])
    held_P = percentile_table(samples[order[half:]])
    fit_P = fit_P[:largest_index_below(fit_P, mu) + 1]
    held_P = held_P[:largest_index_below(held_P, mu) + 1]
    if fit_P.size == 0:
        raise CalibrationError("Every fitting percentile exceeds mu")
    pair = find_scaling_factors(fit_P, mu, T)
    return {
        "alpha": pair.alpha,
        "beta": pair.beta,
        "fit_loss": compute_loss(fit_P, mu, pair.alpha, pair.beta, T),
        "holdout_loss": compute_loss(held_P, mu, pair.alpha, pair.beta, T),
    }
