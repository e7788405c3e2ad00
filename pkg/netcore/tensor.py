"""
Dense tensor arithmetic - weighted sums, convolution and max pooling.

All operations work on float64 numpy arrays. Single samples and batches are
both accepted: a leading batch axis is optional everywhere.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

DTYPE = np.float64


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a float64 array (no copy when already float64)."""
    return np.asarray(x, dtype=DTYPE)


def ensure_finite(t: np.ndarray, where: str = "tensor") -> np.ndarray:
    """
    Check that every element of ``t`` is finite.

    Args:
        t: Array to check
        where: Name used in the error message

    Returns:
        ``t`` unchanged

    Raises:
        FloatingPointError: If ``t`` holds NaN or Inf
    """
    if not np.all(np.isfinite(t)):
        raise FloatingPointError(f"Non-finite values in {where}")
    return t


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------

def dense_forward(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Weighted sum ``output[i] = sum_j w[i][j] * x[j]``.

    Args:
        w: Weight matrix of shape (out, in)
        x: Input vector of length ``in``, or a batch whose trailing axes
           flatten to ``in``

    Returns:
        Vector of length ``out`` or batch of shape (N, out)

    Raises:
        DimensionError: If the input width does not match ``w``
    """
    w = as_tensor(w)
    x = as_tensor(x)
    if w.ndim != 2:
        raise DimensionError(f"Dense weight must be 2-D, got shape {w.shape}")
    if x.ndim == 1:
        if x.shape[0] != w.shape[1]:
            raise DimensionError(f"Dense input has length {x.shape[0]}, expected {w.shape[1]}")
        return w @ x
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != w.shape[1]:
        raise DimensionError(f"Dense input has width {flat.shape[1]}, expected {w.shape[1]}")
    return flat @ w.T


def dense_backward(w: np.ndarray, x: np.ndarray, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a batched dense layer w.r.t. its weight and its input."""
    flat = x.reshape(x.shape[0], -1)
    grad_w = grad_out.T @ flat
    grad_x = (grad_out @ w).reshape(x.shape)
    return grad_w, grad_x


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv2d_output_hw(h: int, w: int, kh: int, kw: int, stride: int = 1, padding: int = 0) -> tuple[int, int]:
    """
    Spatial output size of a convolution (cross-correlation).

    Raises:
        DimensionError: If the kernel does not fit or the stride does not tile
    """
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise DimensionError(f"Kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise DimensionError(f"Stride {stride} does not tile padded input {hp}x{wp} with kernel {kh}x{kw}")
    return (hp - kh) // stride + 1, (wp - kw) // stride + 1


def _batched(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise DimensionError(f"Expected a {ndim - 1}-D sample or {ndim}-D batch, got shape {x.shape}")
    return x, False


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw)
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def conv2d_forward(w: np.ndarray, x: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """
    Cross-correlation of ``x`` with kernel ``w``, no bias.

    Args:
        w: Kernel of shape (out_ch, in_ch, kh, kw)
        x: Input of shape (in_ch, H, W) or (N, in_ch, H, W)
        stride: Step between windows
        padding: Explicit zero padding on every spatial border

    Returns:
        Output of shape (out_ch, Ho, Wo) or (N, out_ch, Ho, Wo)

    Raises:
        DimensionError: On channel or geometry mismatch
    """
    w = as_tensor(w)
    xb, single = _batched(as_tensor(x), 4)
    if w.ndim != 4:
        raise DimensionError(f"Conv kernel must be 4-D, got shape {w.shape}")
    if xb.shape[1] != w.shape[1]:
        raise DimensionError(f"Conv input has {xb.shape[1]} channels, kernel expects {w.shape[1]}")
    kh, kw = w.shape[2], w.shape[3]
    conv2d_output_hw(xb.shape[2], xb.shape[3], kh, kw, stride, padding)
    if padding:
        xb = np.pad(xb, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.einsum("nchwij,ocij->nohw", _windows(xb, kh, kw, stride), w, optimize=True)
    return out[0] if single else out


def conv2d_backward(w: np.ndarray, x: np.ndarray, grad_out: np.ndarray,
                    stride: int = 1, padding: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradients of a batched convolution w.r.t. its kernel and its input.

    Args:
        w: Kernel (out_ch, in_ch, kh, kw)
        x: Batched input (N, in_ch, H, W)
        grad_out: Gradient of the output (N, out_ch, Ho, Wo)

    Returns:
        Tuple (grad_w, grad_x)
    """
    kh, kw = w.shape[2], w.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    grad_w = np.einsum("nohw,nchwij->ocij", grad_out, _windows(xp, kh, kw, stride), optimize=True)
    grad_xp = np.zeros_like(xp)
    ho, wo = grad_out.shape[2], grad_out.shape[3]
    for i in range(kh):
        for j in range(kw):
            grad_xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.einsum(
                "nohw,oc->nchw", grad_out, w[:, :, i, j], optimize=True
            )
    if padding:
        grad_xp = grad_xp[:, :, padding:-padding, padding:-padding]
    return grad_w, grad_xp


def conv2d_fanout(w_shape: tuple[int, ...], input_chw: tuple[int, int, int],
                  stride: int = 1, padding: int = 0) -> np.ndarray:
    """Number of weights each input element is multiplied by (per-input fan-out map)."""
    c, h, wdt = input_chw
    ho, wo = conv2d_output_hw(h, wdt, w_shape[2], w_shape[3], stride, padding)
    ones_out = np.ones((1, w_shape[0], ho, wo), dtype=DTYPE)
    _, fan = conv2d_backward(np.ones(w_shape, dtype=DTYPE), np.zeros((1, c, h, wdt), dtype=DTYPE),
                             ones_out, stride, padding)
    return fan[0]


# ---------------------------------------------------------------------------
# Max pooling
# ---------------------------------------------------------------------------

def maxpool_output_hw(h: int, w: int, window: int, stride: int) -> tuple[int, int]:
    """Spatial output size of max pooling; raises DimensionError if it does not tile."""
    if window > h or window > w or (h - window) % stride or (w - window) % stride:
        raise DimensionError(f"Pool window {window}/stride {stride} does not tile {h}x{w}")
    return (h - window) // stride + 1, (w - window) // stride + 1


def maxpool2d_forward(x: np.ndarray, window: int = 2, stride: int | None = None) -> np.ndarray:
    """
    Per-window maximum over the two trailing spatial axes.

    Applied to a binary spike tensor the result is binary as well.

    Args:
        x: Input (C, H, W) or (N, C, H, W)
        window: Square window size
        stride: Window step (defaults to ``window``)

    Raises:
        DimensionError: If the window/stride does not tile the input
    """
    stride = window if stride is None else stride
    xb, single = _batched(as_tensor(x), 4)
    maxpool_output_hw(xb.shape[2], xb.shape[3], window, stride)
    out = _windows(xb, window, window, stride).max(axis=(-2, -1))
    return out[0] if single else out


def maxpool2d_backward(x: np.ndarray, grad_out: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Route ``grad_out`` to the first maximal element of each window."""
    n, c, ho, wo = grad_out.shape
    win = _windows(x, window, window, stride).reshape(n, c, ho, wo, window * window)
    first = np.argmax(win, axis=-1)
    grad_x = np.zeros_like(x)
    for k in range(window * window):
        i, j = divmod(k, window)
        grad_x[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.where(first == k, grad_out, 0.0)
    return grad_x
