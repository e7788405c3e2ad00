"""
Feed-forward network description and evaluation.

A NetworkSpec is an ordered list of LayerSpec entries. Every weighted layer
except the last one (the readout) is followed by a threshold ReLU whose
ceiling ``mu`` lives on the layer itself. There are no bias terms.
"""

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ArgumentError, DimensionError
from .tensor import (
    DTYPE,
    as_tensor,
    conv2d_backward,
    conv2d_forward,
    conv2d_output_hw,
    dense_backward,
    dense_forward,
    ensure_finite,
    maxpool2d_backward,
    maxpool2d_forward,
    maxpool_output_hw,
)

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


class LayerKind(str, Enum):
    DENSE = "dense"
    CONV2D = "conv2d"
    MAXPOOL2D = "maxpool2d"
    DROPOUT = "dropout"


@dataclass
class LayerSpec:
    """
    One layer of a feed-forward network.

    Attributes:
        kind: Layer type
        weight: (out, in) for dense, (out_ch, in_ch, kh, kw) for conv2d, None otherwise
        mu: Threshold-ReLU ceiling for thresholded layers, None for the readout
        stride: Conv/pool stride
        padding: Explicit zero padding (conv2d only)
        window: Pool window size (maxpool2d only)
        rate: Dropout probability in [0, 1), applied in training mode only
    """

    kind: LayerKind
    weight: Optional[np.ndarray] = None
    mu: Optional[float] = None
    stride: int = 1
    padding: int = 0
    window: int = 2
    rate: float = 0.0

    def __post_init__(self):
        self.kind = LayerKind(self.kind)
        if self.weight is not None:
            self.weight = as_tensor(self.weight)
        if self.is_weighted:
            expected = 2 if self.kind == LayerKind.DENSE else 4
            if self.weight is None or self.weight.ndim != expected:
                raise DimensionError(f"{self.kind.value} layer needs a {expected}-D weight")
        elif self.weight is not None:
            raise DimensionError(f"{self.kind.value} layer carries no weight")
        if self.mu is not None and not self.mu > 0:
            raise ArgumentError(f"Threshold mu must be positive, got {self.mu}")
        if not 0.0 <= self.rate < 1.0:
            raise ArgumentError(f"Dropout rate must lie in [0, 1), got {self.rate}")

    @property
    def is_weighted(self) -> bool:
        return self.kind in (LayerKind.DENSE, LayerKind.CONV2D)

    @property
    def is_thresholded(self) -> bool:
        return self.mu is not None

    def output_shape(self, input_shape: Shape) -> Shape:
        """Shape of one sample after this layer."""
        if self.kind == LayerKind.DENSE:
            width = int(np.prod(input_shape))
            if width != self.weight.shape[1]:
                raise DimensionError(f"Dense layer expects width {self.weight.shape[1]}, got {width}")
            return (self.weight.shape[0],)
        if self.kind == LayerKind.CONV2D:
            if len(input_shape) != 3 or input_shape[0] != self.weight.shape[1]:
                raise DimensionError(f"Conv layer expects ({self.weight.shape[1]}, H, W), got {input_shape}")
            ho, wo = conv2d_output_hw(input_shape[1], input_shape[2], self.weight.shape[2],
                                      self.weight.shape[3], self.stride, self.padding)
            return (self.weight.shape[0], ho, wo)
        if self.kind == LayerKind.MAXPOOL2D:
            if len(input_shape) != 3:
                raise DimensionError(f"Max pooling expects (C, H, W), got {input_shape}")
            ho, wo = maxpool_output_hw(input_shape[1], input_shape[2], self.window, self.stride)
            return (input_shape[0], ho, wo)
        return tuple(input_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Linear/pooling part of the layer on a batch (no activation, no dropout)."""
        if self.kind == LayerKind.DENSE:
            return dense_forward(self.weight, x)
        if self.kind == LayerKind.CONV2D:
            return conv2d_forward(self.weight, x, self.stride, self.padding)
        if self.kind == LayerKind.MAXPOOL2D:
            return maxpool2d_forward(x, self.window, self.stride)
        return x

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> Tuple[Optional[np.ndarray], np.ndarray]:
        """Gradients (weight, input) of :meth:`apply` for a batch ``x``."""
        if self.kind == LayerKind.DENSE:
            return dense_backward(self.weight, x, grad_out)
        if self.kind == LayerKind.CONV2D:
            return conv2d_backward(self.weight, x, grad_out, self.stride, self.padding)
        if self.kind == LayerKind.MAXPOOL2D:
            return None, maxpool2d_backward(x, grad_out, self.window, self.stride)
        return None, grad_out


@dataclass
class NetworkSpec:
    """Ordered layers plus the per-sample input shape."""

    input_shape: Shape
    layers: List[LayerSpec] = field(default_factory=list)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        weighted = self.weighted_indices()
        if not weighted:
            raise DimensionError("Network needs at least one weighted layer")
        if self.layers[weighted[-1]].is_thresholded:
            raise DimensionError("The readout layer must not carry a threshold")
        for i in weighted[:-1]:
            if not self.layers[i].is_thresholded:
                raise DimensionError(f"Hidden weighted layer {i} needs a threshold mu")
        self.layer_shapes()

    def layer_shapes(self) -> List[Shape]:
        """Per-sample shapes: entry ``i`` is the input of layer ``i``; the last is the output."""
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        return shapes

    @property
    def output_shape(self) -> Shape:
        return self.layer_shapes()[-1]

    def weighted_indices(self) -> List[int]:
        return [i for i, layer in enumerate(self.layers) if layer.is_weighted]

    def thresholded_indices(self) -> List[int]:
        return [i for i, layer in enumerate(self.layers) if layer.is_thresholded]

    @property
    def readout_index(self) -> int:
        return self.weighted_indices()[-1]

    def mus(self) -> Dict[int, float]:
        return {i: float(self.layers[i].mu) for i in self.thresholded_indices()}

    def copy(self) -> "NetworkSpec":
        return copy.deepcopy(self)

    def describe(self) -> List[Dict[str, Any]]:
        """Plain-dict summary of the architecture (for logs and reports)."""
        shapes = self.layer_shapes()
        rows = []
        for i, layer in enumerate(self.layers):
            rows.append({
                "index": i,
                "kind": layer.kind.value,
                "input_shape": list(shapes[i]),
                "output_shape": list(shapes[i + 1]),
                "mu": layer.mu,
            })
        return rows


def _clip(x: np.ndarray, mu: float) -> np.ndarray:
    return np.clip(x, 0.0, mu)


def _as_batch(net: NetworkSpec, x) -> Tuple[np.ndarray, bool]:
    x = as_tensor(x)
    if x.shape == net.input_shape:
        return x[None], True
    if x.shape[1:] != net.input_shape:
        raise DimensionError(f"Input shape {x.shape} does not match network input {net.input_shape}")
    return x, False


def forward(net: NetworkSpec, x, mode: str = "infer",
            rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Evaluate the network.

    Args:
        net: Network to evaluate
        x: One sample of ``net.input_shape`` or a batch
        mode: "infer" (deterministic) or "train" (inverted dropout)
        rng: Dropout generator for train mode (seeded default when omitted)

    Returns:
        Tuple (output, preacts) where preacts holds the pre-activation of every
        weighted layer in network order, the readout logits last

    Raises:
        DimensionError: On shape mismatch
        ArgumentError: On an unknown mode
    """
    if mode not in ("train", "infer"):
        raise ArgumentError(f"Unknown forward mode: {mode}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(0)
    h, single = _as_batch(net, x)
    preacts = []
    for layer in net.layers:
        if layer.kind == LayerKind.DROPOUT:
            if mode == "train" and layer.rate > 0:
                keep = (rng.random(h.shape) >= layer.rate).astype(DTYPE)
                h = h * keep / (1.0 - layer.rate)
            continue
        h = layer.apply(h)
        if layer.is_weighted:
            preacts.append(h[0] if single else h)
            if layer.is_thresholded:
                h = _clip(h, layer.mu)
    ensure_finite(h, "network output")
    return (h[0] if single else h), preacts


def layer_input(net: NetworkSpec, x, layer: int) -> np.ndarray:
    """
    Inference-mode input to ``net.layers[layer]`` for a batch ``x``.

    Raises:
        ArgumentError: If ``layer`` is out of range
    """
    if not 0 <= layer < len(net.layers):
        raise ArgumentError(f"Layer index {layer} out of range 0..{len(net.layers) - 1}")
    h, _ = _as_batch(net, x)
    for spec in net.layers[:layer]:
        h = spec.apply(h)
        if spec.is_thresholded:
            h = _clip(h, spec.mu)
    return h


def predict(net: NetworkSpec, x, batch_size: int = 512) -> np.ndarray:
    """Class predictions (argmax of the logits) for a batch."""
    x = as_tensor(x)
    labels = []
    for start in range(0, len(x), batch_size):
        out, _ = forward(net, x[start:start + batch_size])
        labels.append(np.argmax(out, axis=1))
    return np.concatenate(labels) if labels else np.zeros(0, dtype=int)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _he(rng: np.random.Generator, shape: Shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def build_mlp(input_dim: int, hidden: List[int], n_classes: int, rng: np.random.Generator,
              dropout: float = 0.0, mu: float = 1.0) -> NetworkSpec:
    """
    Dense threshold-ReLU network ``input_dim -> hidden... -> n_classes``.

    Dropout layers (if ``dropout > 0``) follow every hidden activation.
    """
    layers = []
    width = input_dim
    for size in hidden:
        layers.append(LayerSpec(LayerKind.DENSE, weight=_he(rng, (size, width), width), mu=mu))
        if dropout > 0:
            layers.append(LayerSpec(LayerKind.DROPOUT, rate=dropout))
        width = size
    layers.append(LayerSpec(LayerKind.DENSE, weight=rng.normal(0.0, np.sqrt(1.0 / width), (n_classes, width))))
    return NetworkSpec((input_dim,), layers)


def build_convnet(input_shape: Shape, channels: List[int], hidden: List[int], n_classes: int,
                  rng: np.random.Generator, dropout: float = 0.0, mu: float = 1.0,
                  kernel: int = 3) -> NetworkSpec:
    """
    Reduced VGG-style stack: for every pair of channel counts a conv-conv-maxpool
    block (a trailing single count gives conv-maxpool), then dense layers.

    Convolutions use 'same' zero padding so only the pools shrink the image.
    """
    layers = []
    shape = tuple(input_shape)
    groups = [channels[i:i + 2] for i in range(0, len(channels), 2)]
    for group in groups:
        for out_ch in group:
            fan_in = shape[0] * kernel * kernel
            layers.append(LayerSpec(LayerKind.CONV2D, weight=_he(rng, (out_ch, shape[0], kernel, kernel), fan_in),
                                    mu=mu, padding=kernel // 2))
            shape = layers[-1].output_shape(shape)
        layers.append(LayerSpec(LayerKind.MAXPOOL2D, window=2, stride=2))
        shape = layers[-1].output_shape(shape)
        if dropout > 0:
            layers.append(LayerSpec(LayerKind.DROPOUT, rate=dropout))
    width = int(np.prod(shape))
    for size in hidden:
        layers.append(LayerSpec(LayerKind.DENSE, weight=_he(rng, (size, width), width), mu=mu))
        if dropout > 0:
            layers.append(LayerSpec(LayerKind.DROPOUT, rate=dropout))
        width = size
    layers.append(LayerSpec(LayerKind.DENSE, weight=rng.normal(0.0, np.sqrt(1.0 / width), (n_classes, width))))
    net = NetworkSpec(tuple(input_shape), layers)
    logger.debug("Built convnet with %d layers, output %s", len(layers), net.output_shape)
    return net
