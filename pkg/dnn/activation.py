"""
Threshold ReLU - clip(x, 0, mu) with a trainable ceiling - and its gradients.
"""

from typing import Tuple

import numpy as np

from netcore.errors import ArgumentError
from netcore.tensor import as_tensor


def _check_mu(mu: float) -> None:
    if not mu > 0:
        raise ArgumentError(f"Threshold mu must be positive, got {mu}")


def threshold_relu(x, mu: float) -> np.ndarray:
    """
    Elementwise 0 for x < 0, x on [0, mu], mu above.

    Args:
        x: Pre-activation tensor
        mu: Positive ceiling

    Returns:
        Clipped tensor
    """
    _check_mu(mu)
    return np.clip(as_tensor(x), 0.0, mu)


def threshold_relu_grad(x, mu: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partial derivatives of :func:`threshold_relu`.

    ``d_dx`` is 1 on the open interval (0, mu) and 0 elsewhere; ``d_dmu`` is 1
    exactly where x > mu (0 at x == mu).

    Returns:
        Tuple (d_dx, d_dmu), both shaped like ``x``
    """
    _check_mu(mu)
    x = as_tensor(x)
    d_dx = ((x > 0.0) & (x < mu)).astype(np.float64)
    d_dmu = (x > mu).astype(np.float64)
    return d_dx, d_dmu
