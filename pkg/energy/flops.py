"""
Operation counts per inference.

A DNN layer costs one MAC per weight use. In the SNN only the first layer
multiplies (it sees the analog input at every step); every other weighted
layer performs one accumulate per (input spike, outgoing synapse) pair.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from netcore.errors import ArgumentError, DimensionError
from netcore.network import LayerKind, NetworkSpec
from netcore.tensor import conv2d_fanout, maxpool2d_forward
from snn.network import SpikeTrace


@dataclass
class LayerFlops:
    """Operation counts of one weighted layer."""

    layer: int
    kind: str
    mac: float = 0.0
    ac: float = 0.0

    @property
    def total(self) -> float:
        return self.mac + self.ac

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def spiking_activity(trace: SpikeTrace, layer: int) -> float:
    """
    Average number of spikes a neuron of ``layer`` emits over the whole run.

    Raises:
        ArgumentError: If the trace has no record for ``layer``
    """
    if layer not in trace.events:
        raise ArgumentError(f"Trace has no layer {layer}; recorded layers: {trace.layers()}")
    events = trace.events[layer]
    return float(events.sum()) / (trace.batch_size * trace.neurons_per_sample(layer))


def _layer_macs(layer, input_shape: Tuple[int, ...]) -> float:
    out_shape = layer.output_shape(input_shape)
    if layer.kind == LayerKind.DENSE:
        return float(layer.weight.size)
    if layer.kind == LayerKind.CONV2D:
        return float(np.prod(out_shape)) * float(np.prod(layer.weight.shape[1:]))
    return 0.0


def count_flops_dnn(net: NetworkSpec, input_shape: Optional[Tuple[int, ...]] = None) -> List[LayerFlops]:
    """
    MAC counts of every weighted layer for one input.

    Raises:
        DimensionError: If ``input_shape`` differs from the network's
    """
    if input_shape is not None and tuple(input_shape) != net.input_shape:
        raise DimensionError(f"Input shape {tuple(input_shape)} does not match network input {net.input_shape}")
    shapes = net.layer_shapes()
    return [LayerFlops(i, net.layers[i].kind.value, mac=_layer_macs(net.layers[i], shapes[i]))
            for i in net.weighted_indices()]


def _fanout(layer, input_shape: Tuple[int, ...]) -> np.ndarray:
    if layer.kind == LayerKind.DENSE:
        return np.full(input_shape, float(layer.weight.shape[0]))
    return conv2d_fanout(layer.weight.shape, input_shape, layer.stride, layer.padding)


def count_flops_snn(net: NetworkSpec, trace: SpikeTrace, T: int) -> List[LayerFlops]:
    """
    Per-inference operation counts of a simulated run.

    The first weighted layer costs ``T`` times its MAC count; every later
    weighted layer costs, summed over steps, each incoming spike times the
    number of synapses it fans out to. Spikes pass through max pooling as
    recorded.

    Raises:
        ArgumentError: If the trace does not belong to ``net`` or to ``T`` steps
    """
    if trace.T != T:
        raise ArgumentError(f"Trace covers {trace.T} steps, expected {T}")
    missing = set(net.thresholded_indices()) - set(trace.events)
    if missing:
        raise ArgumentError(f"Trace has no record of layers {sorted(missing)}")
    shapes = net.layer_shapes()
    weighted = net.weighted_indices()
    counts = [LayerFlops(weighted[0], net.layers[weighted[0]].kind.value,
                         mac=T * _layer_macs(net.layers[weighted[0]], shapes[weighted[0]]))]
    for prev, index in zip(weighted, weighted[1:]):
        events = trace.events[prev].astype(np.float64)
        for between in net.layers[prev + 1:index]:
            if between.kind == LayerKind.MAXPOOL2D:
                n_steps, n = events.shape[:2]
                pooled = maxpool2d_forward(events.reshape((n_steps * n,) + events.shape[2:]),
                                           between.window, between.stride)
                events = pooled.reshape((n_steps, n) + pooled.shape[1:])
        layer = net.layers[index]
        fan = _fanout(layer, shapes[index])
        received = events.sum(axis=(0, 1)).reshape(fan.shape)
        counts.append(LayerFlops(index, layer.kind.value, ac=float(np.sum(received * fan)) / trace.batch_size))
    return counts
