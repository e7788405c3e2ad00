"""
Data loader utilities for IDX files and seeded synthetic classification sets.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from netcore.errors import ArtifactError, ConfigError


_IDX_TYPES = {
    0x08: np.dtype("u1"),
    0x09: np.dtype("i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_IDX_CODES = {dtype: code for code, dtype in _IDX_TYPES.items()}


@dataclass
class Dataset:
    """Samples ``x`` (N, *input_shape) with integer labels ``y`` (N,)."""

    x: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.x) != len(self.y):
            raise ConfigError(f"{len(self.x)} samples but {len(self.y)} labels")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.x.shape[1:])

    def subset(self, indices) -> "Dataset":
        return Dataset(self.x[indices], self.y[indices], self.n_classes)

    def batches(self, batch_size: int, rng: np.random.Generator = None):
        """Yield (x, y) mini-batches, shuffled when ``rng`` is given."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            idx = order[start:start + batch_size]
            yield self.x[idx], self.y[idx]


def load_idx(path: Path) -> np.ndarray:
    """
    Load an IDX array (magic, dims, raw big-endian payload).

    Args:
        path: IDX file path

    Returns:
        Array with the stored shape and dtype

    Raises:
        ConfigError: If the file doesn't exist
        ArtifactError: If the header or payload is malformed
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Data file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0 or raw[2] not in _IDX_TYPES:
        raise ArtifactError(f"{path} is not an IDX file")
    dtype = _IDX_TYPES[raw[2]]
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise ArtifactError(f"{path} has a truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims)) if dims else 1
    if len(raw) - header != count * dtype.itemsize:
        raise ArtifactError(f"{path} payload does not match dims {dims}")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=header).reshape(dims)


def write_idx(path: Path, array: np.ndarray) -> Path:
    """Write ``array`` as an IDX file (dtype must be one of the IDX types)."""
    array = np.asarray(array)
    key = array.dtype.newbyteorder(">") if array.dtype.itemsize > 1 else array.dtype
    if key not in _IDX_CODES:
        raise ArtifactError(f"dtype {array.dtype} has no IDX code")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = bytes([0, 0, _IDX_CODES[key], array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + array.astype(key).tobytes())
    return path


def load_idx_dataset(images_path: Path, labels_path: Path, scale: float = 1.0 / 255.0) -> Dataset:
    """
    Load an image/label IDX pair.

    Images of shape (N, H, W) gain a channel axis; unsigned byte images are
    multiplied by ``scale``.
    """
    raw = load_idx(images_path)
    labels = load_idx(labels_path).astype(np.int64)
    images = raw.astype(np.float64)
    if images.ndim == 3:
        images = images[:, None]
    if raw.dtype == np.uint8:
        images = images * scale
    n_classes = int(labels.max()) + 1 if len(labels) else 0
    return Dataset(images, labels, n_classes)


def make_blobs(n_samples: int, n_classes: int, n_features: int = 2, spread: float = 0.5,
               seed: int = 0, box: float = 2.0) -> Dataset:
    """
    Gaussian blobs: one isotropic cluster per class around uniform random centres.

    Features are shifted to be non-negative so unit-scale thresholds fit them.
    """
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-box, box, size=(n_classes, n_features))
    y = np.arange(n_samples) % n_classes
    rng.shuffle(y)
    x = centres[y] + rng.normal(0.0, spread, size=(n_samples, n_features))
    x = (x - x.min(axis=0)) / max(np.ptp(x), 1e-12)
    return Dataset(x, y, n_classes)


def make_arcs(n_samples: int, n_classes: int = 2, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Interleaved half-circle arcs, one per class, rotated evenly and offset."""
    rng = np.random.default_rng(seed)
    y = np.arange(n_samples) % n_classes
    rng.shuffle(y)
    theta = rng.uniform(0.0, np.pi, size=n_samples)
    rotation = 2.0 * np.pi * y / max(n_classes, 2)
    offset = np.stack([np.cos(rotation), np.sin(rotation)], axis=1) * 0.5
    x = np.stack([np.cos(theta + rotation), np.sin(theta + rotation)], axis=1) + offset
    x += rng.normal(0.0, noise, size=x.shape)
    x = (x - x.min(axis=0)) / max(np.ptp(x), 1e-12)
    return Dataset(x, y, n_classes)


def train_test_split(data: Dataset, test_fraction: float, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Seeded random split; ``test_fraction`` of the samples go to the test set."""
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(data))
    n_test = int(round(len(data) * test_fraction))
    return data.subset(order[n_test:]), data.subset(order[:n_test])
