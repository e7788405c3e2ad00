"""
Portable weight container shared by DNN and SNN artifacts.

Byte layout (all integers and floats little-endian):

    header
        4s   magic  b"SNNW"
        u16  format version (1)
        u8   container kind (0 = DNN, 1 = SNN)
        u32  time steps (0 for DNN containers)
        u32  number of input dims, followed by that many u32 dims
        u32  number of layers
    per layer record
        u8   kind tag (0 dense, 1 conv2d, 2 maxpool2d, 3 dropout)
        u32  stride, u32 padding, u32 window
        f64  dropout rate
        f64  mu (NaN for layers without a threshold)
        u32  weight ndim (0 when the layer has no weight), then ndim u32 dims
        f64[...] weight payload, row-major
        SNN containers only:
        u8   has-neuron flag, then 4 x f64 (V^th, beta, lambda, delta) if set
    trailer
        32s  SHA-256 digest of every preceding byte
"""

import hashlib
import io
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ArtifactError
from .network import LayerKind, LayerSpec, NetworkSpec

logger = logging.getLogger(__name__)

MAGIC = b"SNNW"
FORMAT_VERSION = 1
KIND_DNN = 0
KIND_SNN = 1

_KIND_TAGS = {
    LayerKind.DENSE: 0,
    LayerKind.CONV2D: 1,
    LayerKind.MAXPOOL2D: 2,
    LayerKind.DROPOUT: 3,
}
_TAG_KINDS = {tag: kind for kind, tag in _KIND_TAGS.items()}

NeuronRecord = Tuple[float, float, float, float]


@dataclass
class Container:
    """Decoded contents of a weight file."""

    network: NetworkSpec
    kind: int = KIND_DNN
    time_steps: int = 0
    neurons: Dict[int, NeuronRecord] = field(default_factory=dict)


def encode(network: NetworkSpec, kind: int = KIND_DNN, time_steps: int = 0,
           neurons: Optional[Dict[int, NeuronRecord]] = None) -> bytes:
    """
    Serialize a network (and optional per-layer neuron records) to bytes.

    Args:
        network: Network whose layers are written
        kind: KIND_DNN or KIND_SNN
        time_steps: Calibration time steps stored in the header
        neurons: Layer index -> (V^th, beta, lambda, delta), SNN containers only

    Returns:
        Encoded container including the trailing digest
    """
    neurons = neurons or {}
    buf = io.BytesIO()
    buf.write(struct.pack("<4sHBI", MAGIC, FORMAT_VERSION, kind, time_steps))
    buf.write(struct.pack("<I", len(network.input_shape)))
    buf.write(struct.pack(f"<{len(network.input_shape)}I", *network.input_shape))
    buf.write(struct.pack("<I", len(network.layers)))
    for index, layer in enumerate(network.layers):
        mu = math.nan if layer.mu is None else float(layer.mu)
        buf.write(struct.pack("<BIIIdd", _KIND_TAGS[layer.kind], layer.stride, layer.padding,
                              layer.window, layer.rate, mu))
        if layer.weight is None:
            buf.write(struct.pack("<I", 0))
        else:
            shape = layer.weight.shape
            buf.write(struct.pack(f"<I{len(shape)}I", len(shape), *shape))
            buf.write(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        if kind == KIND_SNN:
            record = neurons.get(index)
            if record is None:
                buf.write(struct.pack("<B", 0))
            else:
                buf.write(struct.pack("<B4d", 1, *record))
    payload = buf.getvalue()
    return payload + hashlib.sha256(payload).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ArtifactError("Weight container is truncated")
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values

    def take_array(self, shape: tuple) -> np.ndarray:
        count = int(np.prod(shape))
        if self.pos + 8 * count > len(self.data):
            raise ArtifactError("Weight container is truncated")
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos)
        self.pos += 8 * count
        return arr.astype(np.float64).reshape(shape)


def decode(data: bytes) -> Container:
    """
    Parse bytes produced by :func:`encode`.

    Raises:
        ArtifactError: On bad magic, unsupported version, checksum mismatch
            or malformed records
    """
    if len(data) < 32 + 4 or data[:4] != MAGIC:
        raise ArtifactError("Not a weight container (bad magic)")
    payload, digest = data[:-32], data[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ArtifactError("Weight container checksum mismatch")
    reader = _Reader(payload)
    _, version, kind, time_steps = reader.take("<4sHBI")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"Unsupported container version {version}")
    (ndim,) = reader.take("<I")
    input_shape = reader.take(f"<{ndim}I")
    (n_layers,) = reader.take("<I")
    layers = []
    neurons: Dict[int, NeuronRecord] = {}
    for index in range(n_layers):
        tag, stride, padding, window, rate, mu = reader.take("<BIIIdd")
        if tag not in _TAG_KINDS:
            raise ArtifactError(f"Unknown layer tag {tag} in record {index}")
        (wdim,) = reader.take("<I")
        weight = None
        if wdim:
            shape = reader.take(f"<{wdim}I")
            weight = reader.take_array(shape)
        if kind == KIND_SNN:
            (flag,) = reader.take("<B")
            if flag:
                neurons[index] = tuple(float(v) for v in reader.take("<4d"))
        try:
            layers.append(LayerSpec(_TAG_KINDS[tag], weight=weight, mu=None if math.isnan(mu) else mu,
                                    stride=stride, padding=padding, window=window, rate=rate))
        except ValueError as e:
            raise ArtifactError(f"Invalid layer record {index}: {e}") from e
    if reader.pos != len(payload):
        raise ArtifactError("Trailing bytes after the last layer record")
    try:
        network = NetworkSpec(tuple(input_shape), layers)
    except ValueError as e:
        raise ArtifactError(f"Container holds an inconsistent network: {e}") from e
    return Container(network=network, kind=kind, time_steps=time_steps, neurons=neurons)


def save_container(path: Path, network: NetworkSpec, kind: int = KIND_DNN, time_steps: int = 0,
                   neurons: Optional[Dict[int, NeuronRecord]] = None) -> Path:
    """Write a container to ``path`` and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(network, kind, time_steps, neurons))
    logger.debug("Wrote %s container with %d layers to %s", "SNN" if kind else "DNN", len(network.layers), path)
    return path


def load_container(path: Path) -> Container:
    """
    Read a container from ``path``.

    Raises:
        ArtifactError: If the file is missing or corrupted
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Weight file not found: {path}")
    return decode(path.read_bytes())


def save_network(path: Path, network: NetworkSpec) -> Path:
    """Persist a DNN."""
    return save_container(path, network, KIND_DNN)


def load_network(path: Path) -> NetworkSpec:
    """Load a DNN; raises ArtifactError when the file holds a spiking network."""
    container = load_container(path)
    if container.kind != KIND_DNN:
        raise ArtifactError(f"{path} holds a spiking network, expected a DNN")
    return container.network
