"""
Integrate-and-fire neuron primitives.

Membrane update:  U_temp = lam * U + drive
Firing:           spike where U_temp > V^th (strict), value beta * V^th
Soft reset:       U' = U_temp - V^th for every neuron that fired
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from netcore.errors import ArgumentError
from netcore.tensor import as_tensor


@dataclass
class MembraneState:
    """Membrane potential ``U`` of one layer at time step ``t``."""

    U: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape) -> "MembraneState":
        return cls(np.zeros(shape, dtype=np.float64), 0)


def _check(vth: float, lam: float, beta: float = 1.0) -> None:
    if not vth > 0:
        raise ArgumentError(f"Spiking threshold must be positive, got {vth}")
    if not 0 < lam <= 1:
        raise ArgumentError(f"Leak must lie in (0, 1], got {lam}")
    if beta < 0:
        raise ArgumentError(f"Output scale must be non-negative, got {beta}")


def integrate_and_fire(state: MembraneState, drive, vth: float, beta: float = 1.0,
                       lam: float = 1.0) -> Tuple[np.ndarray, np.ndarray, MembraneState]:
    """Like :func:`scaled_if_step` but also returns the boolean firing mask first."""
    _check(vth, lam, beta)
    u_temp = lam * state.U + as_tensor(drive)
    fired = u_temp > vth
    spikes = np.where(fired, beta * vth, 0.0)
    return fired, spikes, MembraneState(u_temp - np.where(fired, vth, 0.0), state.t + 1)


def scaled_if_step(state: MembraneState, drive, vth: float, beta: float,
                   lam: float = 1.0) -> Tuple[np.ndarray, MembraneState]:
    """
    One step of the beta-scaled IF neuron.

    Firing decisions and the reset use ``vth``; only the emitted value is
    scaled to ``beta * vth``.

    Returns:
        Tuple (spikes, new state)
    """
    _, spikes, new_state = integrate_and_fire(state, drive, vth, beta, lam)
    return spikes, new_state


def if_step(state: MembraneState, drive, vth: float, lam: float = 1.0) -> Tuple[np.ndarray, MembraneState]:
    """One step of the (leaky) IF neuron; spikes carry the value ``vth``."""
    return scaled_if_step(state, drive, vth, 1.0, lam)


def closed_form_activation(z, vth: float, T: int, delta: float = 0.0, beta: float = 1.0,
                           strict: bool = False):
    """
    Time-averaged IF output for a constant drive ``z`` over ``T`` steps.

    ``(beta * vth / T) * clip(floor(T * (z + delta) / vth), 0, T)``; with
    ``strict=True`` the floor is replaced by ``ceil(...) - 1``, which also
    matches the strict-inequality simulation at exact staircase boundaries.

    Works elementwise on arrays.
    """
    if not vth > 0:
        raise ArgumentError(f"Spiking threshold must be positive, got {vth}")
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    scaled = T * (np.asarray(z, dtype=np.float64) + delta) / vth
    steps = np.ceil(scaled) - 1.0 if strict else np.floor(scaled)
    out = (beta * vth / T) * np.clip(steps, 0, T)
    return float(out) if np.ndim(out) == 0 else out


def surrogate_grad(s, alpha_mu: float):
    """Boxcar pseudo-derivative: 1 where 0 <= s <= 2 * alpha_mu, else 0."""
    if not alpha_mu > 0:
        raise ArgumentError(f"alpha_mu must be positive, got {alpha_mu}")
    s = np.asarray(s, dtype=np.float64)
    out = ((s >= 0.0) & (s <= 2.0 * alpha_mu)).astype(np.float64)
    return float(out) if out.ndim == 0 else out
