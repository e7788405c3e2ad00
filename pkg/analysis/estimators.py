"""
Plug-in estimators of the expected conversion error and its components.

With ``d`` the DNN pre-activation, ``s`` the SNN pre-activation and ``mu``
the clipping threshold:

    K(mu)    = (1/mu) * E[d ; 0 <= d <= mu]
    g_i      = P((i - 1/2) mu/T <= s < (i + 1/2) mu/T),   i = 1..T-1
    h        = sum_i (i/T) g_i + P(T' <= s <= mu),         T' = (T - 1/2) mu/T
    Delta   ~= mu * (K - h)

``h`` belongs to the half-step shifted staircase; the unshifted staircase
with threshold ``c`` uses h' over the bins [i c/T, (i+1) c/T). All estimators
are averages of per-sample terms (no histograms); each has a
``*_terms`` helper returning those terms for the bootstrap.
"""

from typing import Optional

import numpy as np

from netcore.errors import ArgumentError, EstimationError
from snn.neuron import closed_form_activation

from .distribution import DEFAULT_RESAMPLES, DistLike, Estimate, as_distribution, difference_estimate


def _check(mu: float, T: Optional[int] = None) -> None:
    if not mu > 0:
        raise ArgumentError(f"mu must be positive, got {mu}")
    if T is not None and T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")


def t_prime(T: int, mu: float) -> float:
    """Lower edge of the last half-shifted bin, (T - 1/2) * mu / T."""
    _check(mu, T)
    return (T - 0.5) * mu / T


def _half_edges(T: int, mu: float) -> np.ndarray:
    # edges[k] = (k + 1/2) mu / T; bin i spans [edges[i-1], edges[i])
    return (np.arange(T) + 0.5) * mu / T


def k_terms(d: np.ndarray, mu: float) -> np.ndarray:
    return np.where((d >= 0) & (d <= mu), d, 0.0) / mu


def compute_K(dist_d: DistLike, mu: float) -> float:
    """
    Normalised mean DNN output below the threshold, in [0, 1].

    Raises:
        EstimationError: If no sample lies in [0, mu]
        InsufficientSamplesError: Below the sample floor
    """
    _check(mu)
    d = as_distribution(dist_d).require()
    if not np.any((d >= 0) & (d <= mu)):
        raise EstimationError(f"No samples inside [0, {mu}]")
    return float(k_terms(d, mu).mean())


def g_terms(s: np.ndarray, i: int, T: int, mu: float) -> np.ndarray:
    edges = _half_edges(T, mu)
    return ((s >= edges[i - 1]) & (s < edges[i])).astype(np.float64)


def compute_g(dist_s: DistLike, i: int, T: int, mu: float) -> float:
    """Probability mass of the i-th half-shifted staircase bin."""
    _check(mu, T)
    if not 1 <= i <= T - 1:
        raise ArgumentError(f"Bin index must lie in 1..{T - 1}, got {i}")
    s = as_distribution(dist_s).require()
    return float(g_terms(s, i, T, mu).mean())


def compute_g_all(dist_s: DistLike, T: int, mu: float) -> np.ndarray:
    """g_1 .. g_{T-1} as an array (empty for T = 1)."""
    return np.array([compute_g(dist_s, i, T, mu) for i in range(1, T)], dtype=np.float64)


def h_terms(s: np.ndarray, T: int, mu: float, biased: bool = True) -> np.ndarray:
    if biased:
        edges = _half_edges(T, mu)
        terms = np.zeros_like(s)
        for i in range(1, T):
            terms += (i / T) * ((s >= edges[i - 1]) & (s < edges[i]))
        return terms + ((s >= edges[T - 1]) & (s <= mu))
    # Unshifted staircase: step index floor(T s / mu) below mu, full step at mu
    steps = np.floor(T * s / mu)
    inside = (s >= 0) & (s < mu)
    return np.where(inside, np.clip(steps, 0, T) / T, 0.0) + (s == mu)


def compute_h(dist_s: DistLike, T: int, mu: float, biased: bool = True) -> float:
    """
    Expected staircase height in units of ``mu`` (mass above ``mu`` excluded).

    Args:
        dist_s: SNN pre-activation samples
        T: Number of time steps
        mu: Threshold of the staircase
        biased: True for the half-step shifted staircase (h), False for the
            unshifted one (h')
    """
    _check(mu, T)
    s = as_distribution(dist_s).require()
    return float(h_terms(s, T, mu, biased).mean())


def predicted_delta(K: float, h: float, mu: float) -> float:
    """mu * (K - h)."""
    return mu * (K - h)


def delta_alpha_beta_terms(d: np.ndarray, s: np.ndarray, mu: float, alpha: float, beta: float, T: int):
    """DNN-side and SNN-side per-sample terms whose mean difference is Delta_alpha_beta."""
    cut = alpha * mu
    dnn = np.where((d >= 0) & (d <= mu), d, 0.0)
    snn = cut * beta * (h_terms(s, T, cut, biased=False) + ((s > cut) & (s <= mu)))
    return dnn, snn


def predicted_delta_alpha_beta(dist_d: DistLike, dist_s: DistLike, mu: float, alpha: float,
                               beta: float, T: int) -> float:
    """
    Expected error of the (alpha, beta) scaled staircase.

    ``alpha*mu*(K(alpha*mu) - beta*h'(T, alpha*mu)) + E[d ; alpha*mu < d <= mu]
    - alpha*beta*mu * P(alpha*mu < s <= mu)``.
    """
    _check(mu, T)
    if not 0 < alpha <= 1:
        raise ArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    if beta < 0:
        raise ArgumentError(f"beta must be non-negative, got {beta}")
    d = as_distribution(dist_d).require()
    s = as_distribution(dist_s).require()
    cut = alpha * mu
    K = float(k_terms(d, cut).mean())
    h_prime = float(h_terms(s, T, cut, biased=False).mean())
    upper_d = float(np.mean(np.where((d > cut) & (d <= mu), d, 0.0)))
    upper_s = float(np.mean((s > cut) & (s <= mu)))
    return cut * (K - beta * h_prime) + upper_d - cut * beta * upper_s


def empirical_delta(dist_d: DistLike, dist_s: DistLike, mu: float, T: int, vth: Optional[float] = None,
                    beta: float = 1.0, delta: float = 0.0, include_tail: bool = False,
                    paired: Optional[bool] = None, n_resamples: int = DEFAULT_RESAMPLES,
                    seed: int = 0) -> Estimate:
    """
    Direct Monte-Carlo estimate of E[DNN output] - E[SNN output].

    The DNN output is ``clip(d, 0, mu)`` and the SNN output the closed-form
    staircase with threshold ``vth`` (default ``mu``), scale ``beta`` and
    bias shift ``delta``. Samples above ``mu`` are dropped unless
    ``include_tail`` is set.

    Args:
        paired: Whether d and s are the same samples; defaults to object identity
    """
    _check(mu, T)
    if paired is None:
        paired = dist_d is dist_s
    d = as_distribution(dist_d).require()
    s = as_distribution(dist_s).require()
    vth = mu if vth is None else vth
    dnn = np.clip(d, 0.0, mu)
    snn = closed_form_activation(s, vth, T, delta, beta)
    if not include_tail:
        dnn = np.where(d <= mu, dnn, 0.0)
        snn = np.where(s <= mu, snn, 0.0)
    return difference_estimate(dnn, snn, paired, n_resamples, seed)


def mass_above_mu(dist: DistLike, mu: float) -> float:
    """Fraction of samples above ``mu`` (left out of every Delta estimate)."""
    _check(mu)
    return float(np.mean(as_distribution(dist).samples > mu))
