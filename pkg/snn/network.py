"""
Spiking network simulation with direct input encoding.

The analog input drives the first weighted layer at every time step; hidden
layers exchange spikes; the readout layer never spikes and its accumulated
membrane potential is the class score.
"""

import base64
import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from netcore.errors import ArgumentError, ArtifactError
from netcore.network import LayerKind, NetworkSpec
from netcore.tensor import as_tensor, ensure_finite
from netcore.weights_io import KIND_SNN, load_container, save_container

from .neuron import MembraneState, integrate_and_fire

logger = logging.getLogger(__name__)


@dataclass
class NeuronParams:
    """Per-layer spiking parameters: threshold, output scale, leak, bias shift."""

    vth: float
    beta: float = 1.0
    lam: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.vth > 0:
            raise ArgumentError(f"V^th must be positive, got {self.vth}")
        if self.beta < 0:
            raise ArgumentError(f"beta must be non-negative, got {self.beta}")
        if self.beta == 0:
            logger.warning("beta=0 silences this layer: every spike carries the value 0")
        if not 0 < self.lam <= 1:
            raise ArgumentError(f"Leak must lie in (0, 1], got {self.lam}")
        if self.delta < 0:
            raise ArgumentError(f"Bias shift must be non-negative, got {self.delta}")

    @property
    def spike_value(self) -> float:
        return self.beta * self.vth

    def as_record(self) -> Tuple[float, float, float, float]:
        return (float(self.vth), float(self.beta), float(self.lam), float(self.delta))


@dataclass
class SpikingNetwork:
    """
    Layers mirrored from a NetworkSpec plus neuron parameters for every
    thresholded layer.
    """

    network: NetworkSpec
    neurons: Dict[int, NeuronParams] = field(default_factory=dict)
    time_steps: int = 0

    def __post_init__(self):
        expected = set(self.network.thresholded_indices())
        if set(self.neurons) != expected:
            raise ArgumentError(f"Neuron parameters for layers {sorted(self.neurons)}, expected {sorted(expected)}")

    @property
    def layers(self):
        return self.network.layers

    def spiking_indices(self) -> List[int]:
        return self.network.thresholded_indices()

    def copy(self) -> "SpikingNetwork":
        return copy.deepcopy(self)


@dataclass
class SpikeTrace:
    """
    Firing record of a simulation: ``events[layer]`` is a boolean array of shape
    (T, N, *neuron_shape); every event carries the value ``values[layer]``.
    """

    T: int
    batch_size: int
    events: Dict[int, np.ndarray] = field(default_factory=dict)
    values: Dict[int, float] = field(default_factory=dict)

    @property
    def input_replicas(self) -> int:
        """Times the analog input is presented (once per step)."""
        return self.T

    def layers(self) -> List[int]:
        return sorted(self.events)

    def spikes(self, layer: int, t: int) -> np.ndarray:
        """Spike tensor of ``layer`` at step ``t`` (values 0 or beta*V^th)."""
        return self.events[layer][t] * self.values[layer]

    def neurons_per_sample(self, layer: int) -> int:
        return int(np.prod(self.events[layer].shape[2:]))

    def to_dict(self) -> Dict[str, Any]:
        """Compact JSON form: packed bitmaps plus the per-layer scale constant."""
        layers = []
        for index in self.layers():
            ev = self.events[index]
            layers.append({
                "layer": index,
                "shape": list(ev.shape),
                "value": self.values[index],
                "bitmap": base64.b64encode(np.packbits(ev.ravel()).tobytes()).decode("ascii"),
            })
        return {"schema_version": 1, "T": self.T, "batch_size": self.batch_size, "layers": layers}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SpikeTrace":
        trace = cls(T=payload["T"], batch_size=payload["batch_size"])
        for entry in payload["layers"]:
            shape = tuple(entry["shape"])
            bits = np.frombuffer(base64.b64decode(entry["bitmap"]), dtype=np.uint8)
            trace.events[entry["layer"]] = np.unpackbits(bits, count=int(np.prod(shape))).astype(bool).reshape(shape)
            trace.values[entry["layer"]] = float(entry["value"])
        return trace


def snn_forward(snn: SpikingNetwork, x, T: int) -> Tuple[np.ndarray, SpikeTrace, List[np.ndarray]]:
    """
    Simulate ``snn`` for ``T`` steps.

    Args:
        snn: Spiking network
        x: One input sample or a batch
        T: Number of time steps

    Returns:
        Tuple (scores, trace, avg_out) - accumulated readout potentials, the
        spike trace, and the time-averaged output of every spiking layer in
        network order

    Raises:
        ArgumentError: If T < 1
    """
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    net = snn.network
    x = as_tensor(x)
    single = x.shape == net.input_shape
    h0 = x[None] if single else x
    n = h0.shape[0]
    shapes = net.layer_shapes()
    first = net.weighted_indices()[0]
    readout = net.readout_index
    first_drive = net.layers[first].apply(_pre_first(net, h0, first))

    states = {i: MembraneState.zeros((n,) + shapes[i + 1]) for i in snn.spiking_indices()}
    trace = SpikeTrace(T=T, batch_size=n)
    for i in snn.spiking_indices():
        trace.events[i] = np.zeros((T, n) + shapes[i + 1], dtype=bool)
        trace.values[i] = snn.neurons[i].spike_value
    totals = {i: np.zeros((n,) + shapes[i + 1]) for i in snn.spiking_indices()}
    scores = np.zeros((n,) + shapes[readout + 1])

    for t in range(T):
        h = h0
        for i, layer in enumerate(net.layers):
            if layer.kind == LayerKind.DROPOUT or i < first:
                continue
            drive = first_drive if i == first else layer.apply(h)
            if not layer.is_weighted:
                h = drive
                continue
            if i == readout:
                scores += drive
                break
            p = snn.neurons[i]
            # delta enters every step, i.e. a T*delta shift of the T-step sum
            fired, h, states[i] = integrate_and_fire(states[i], drive + p.delta, p.vth, p.beta, p.lam)
            trace.events[i][t] = fired
            totals[i] += h

    ensure_finite(scores, "SNN scores")
    avg_out = [totals[i] / T for i in snn.spiking_indices()]
    if single:
        return scores[0], trace, [a[0] for a in avg_out]
    return scores, trace, avg_out


def _pre_first(net: NetworkSpec, h: np.ndarray, first: int) -> np.ndarray:
    # Non-weighted layers ahead of the first weighted layer act on the analog input.
    for layer in net.layers[:first]:
        h = layer.apply(h)
    return h


def snn_predict(snn: SpikingNetwork, x, T: int, batch_size: int = 256) -> np.ndarray:
    """Argmax of the accumulated readout scores for a batch."""
    x = as_tensor(x)
    labels = []
    for start in range(0, len(x), batch_size):
        scores, _, _ = snn_forward(snn, x[start:start + batch_size], T)
        labels.append(np.argmax(scores, axis=1))
    return np.concatenate(labels) if labels else np.zeros(0, dtype=int)


def snn_accuracy(snn: SpikingNetwork, data, T: int) -> float:
    """Fraction of ``data`` classified correctly after ``T`` steps."""
    if len(data) == 0:
        return 0.0
    return float(np.mean(snn_predict(snn, data.x, T) == data.y))


def save_spiking_network(path: Path, snn: SpikingNetwork) -> Path:
    """Persist a spiking network in the shared weight container."""
    records = {i: p.as_record() for i, p in snn.neurons.items()}
    return save_container(path, snn.network, KIND_SNN, snn.time_steps, records)


def load_spiking_network(path: Path) -> SpikingNetwork:
    """
    Load a spiking network.

    Raises:
        ArtifactError: If the file is corrupted or holds a DNN
    """
    container = load_container(path)
    if container.kind != KIND_SNN:
        raise ArtifactError(f"{path} holds a DNN, expected a spiking network")
    try:
        neurons = {i: NeuronParams(*record) for i, record in container.neurons.items()}
        return SpikingNetwork(container.network, neurons, container.time_steps)
    except ValueError as e:
        raise ArtifactError(f"{path} holds invalid neuron records: {e}") from e
