"""
Differentiable Operations Module

Every operation takes and returns ``Tensor`` objects in NHWC layout and
records a vector-Jacobian product on the active tape when one of its inputs
requires a gradient.

Components:
- conv2d_down / conv2d_up: strided convolution with "same" zero padding and
  its adjoint (transposed convolution)
- gdn: generalized divisive normalization and its inverse
- prelu, sigmoid: activations
- mse_loss, weighted_sum: scalar reductions
- concat_channels, reshape, add, zeros_like: plumbing
- cast: precision change between the model and the channel
- power_normalize, complex_gain: channel-side operations on interleaved
  (real, imaginary) pairs
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from JSCCF.autodiff.config.config import CHANNEL_DTYPE, GDN_BETA_MIN
from JSCCF.autodiff.tensor import Tensor, make_result
from JSCCF.errors import DegenerateSignalError, ParameterError, ShapeError

logger = logging.getLogger("JSCCF.autodiff.functional")


# ---------------------------------------------------------------------------
# Convolution helpers (plain numpy)
# ---------------------------------------------------------------------------

def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Return (output extent, leading pad, trailing pad) for "same" padding."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _check_conv_shapes(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, in_axis: int, out_axis: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"convolution input must be N x H x W x C, got shape {x.shape}")
    if kernel.ndim != 4:
        raise ShapeError(f"convolution kernel must be h x w x Cin x Cout, got shape {kernel.shape}")
    if x.shape[3] != kernel.shape[in_axis]:
        raise ShapeError(
            f"channel mismatch: input has {x.shape[3]} channels, kernel expects {kernel.shape[in_axis]}"
        )
    if bias.shape != (kernel.shape[out_axis],):
        raise ShapeError(f"bias shape {bias.shape} does not match {kernel.shape[out_axis]} output channels")


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Strided patch view of the padded input: N x OH x OW x C x kh x kw."""
    _, h, w, _ = x.shape
    oh, top, bottom = same_padding(h, kh, stride)
    ow, left, right = same_padding(w, kw, stride)
    padded = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    view = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    return view[:, : (oh - 1) * stride + 1: stride, : (ow - 1) * stride + 1: stride]


def _correlate(x: np.ndarray, kernel: np.ndarray, stride: int) -> np.ndarray:
    kh, kw = kernel.shape[:2]
    cols = _windows(x, kh, kw, stride)
    return np.tensordot(cols, kernel, axes=([3, 4, 5], [2, 0, 1]))


def _correlate_adjoint(g: np.ndarray, kernel: np.ndarray, stride: int, in_shape: Tuple[int, ...]) -> np.ndarray:
    """Adjoint of ``_correlate`` with respect to its input."""
    n, h, w, cin = in_shape
    kh, kw = kernel.shape[:2]
    oh, top, bottom = same_padding(h, kh, stride)
    ow, left, right = same_padding(w, kw, stride)
    buf = np.zeros((n, h + top + bottom, w + left + right, cin), dtype=g.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = g @ kernel[i, j].T
            buf[:, i: i + (oh - 1) * stride + 1: stride, j: j + (ow - 1) * stride + 1: stride, :] += contrib
    return buf[:, top: top + h, left: left + w, :]


def _correlate_kernel_grad(x: np.ndarray, g: np.ndarray, kernel_shape: Tuple[int, ...], stride: int) -> np.ndarray:
    kh, kw = kernel_shape[:2]
    cols = _windows(x, kh, kw, stride)
    grad = np.tensordot(cols, g, axes=([0, 1, 2], [0, 1, 2]))
    return grad.transpose(1, 2, 0, 3)


# ---------------------------------------------------------------------------
# Neural layer primitives
# ---------------------------------------------------------------------------

def conv2d_down(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """
    Strided cross-correlation with "same" zero padding.

    Args:
        x: Feature map N x H x W x Cin
        kernel: Filters h x w x Cin x Cout
        bias: Per-output-channel offsets (Cout,)
        stride: Positive integer stride

    Returns:
        Feature map N x ceil(H/s) x ceil(W/s) x Cout

    Raises:
        ShapeError: On channel or rank mismatch
    """
    if stride < 1:
        raise ShapeError(f"stride must be a positive integer, got {stride}")
    _check_conv_shapes(x.data, kernel.data, bias.data, in_axis=2, out_axis=3)
    xd, kd = x.data, kernel.data
    out = _correlate(xd, kd, stride) + bias.data

    def backward(g):
        return (
            _correlate_adjoint(g, kd, stride, xd.shape) if x.requires_grad else None,
            _correlate_kernel_grad(xd, g, kd.shape, stride) if kernel.requires_grad else None,
            g.sum(axis=(0, 1, 2)) if bias.requires_grad else None,
        )

    return make_result("conv2d_down", (x, kernel, bias), out, backward)


def conv2d_up(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """
    Transposed convolution: the adjoint of ``conv2d_down`` (zero bias).

    With ``kernel`` of shape h x w x Cin x Cout, the output is
    N x sH x sW x Cout and, for any A of that shape and B of the input shape,
    <conv2d_down(A, K^T), B> == <A, conv2d_up(B, K)> where K^T swaps the two
    channel axes of K.

    Raises:
        ShapeError: On channel or rank mismatch
    """
    if stride < 1:
        raise ShapeError(f"stride must be a positive integer, got {stride}")
    _check_conv_shapes(x.data, kernel.data, bias.data, in_axis=2, out_axis=3)
    xd = x.data
    kt = kernel.data.transpose(0, 1, 3, 2)
    n, h, w, _ = xd.shape
    out_shape = (n, h * stride, w * stride, kt.shape[2])
    out = _correlate_adjoint(xd, kt, stride, out_shape) + bias.data

    def backward(g):
        grad_kernel = None
        if kernel.requires_grad:
            grad_kernel = _correlate_kernel_grad(g, xd, kt.shape, stride).transpose(0, 1, 3, 2)
        return (
            _correlate(g, kt, stride) if x.requires_grad else None,
            grad_kernel,
            g.sum(axis=(0, 1, 2)) if bias.requires_grad else None,
        )

    return make_result("conv2d_up", (x, kernel, bias), out, backward)


def gdn(x: Tensor, beta: Tensor, gamma: Tensor, inverse: bool = False) -> Tensor:
    """
    Generalized divisive normalization across channels at every location.

    forward:  y_i = x_i / sqrt(beta_i + sum_j gamma_ji x_j^2)
    inverse:  y_i = x_i * sqrt(beta_i + sum_j gamma_ji x_j^2)

    beta is read through its floor, so a zero offset behaves as GDN_BETA_MIN.

    Raises:
        ParameterError: If beta or gamma has a negative (or NaN) entry
        ShapeError: If parameter extents do not match the channel count
    """
    xd, bd, gd = x.data, beta.data, gamma.data
    channels = xd.shape[-1]
    if bd.shape != (channels,) or gd.shape != (channels, channels):
        raise ShapeError(
            f"GDN parameters {bd.shape}/{gd.shape} do not match {channels} channels"
        )
    if not (np.all(bd >= 0) and np.all(gd >= 0)):
        raise ParameterError("GDN beta and gamma must be non-negative")

    squared = xd * xd
    floored = bd >= GDN_BETA_MIN
    norm = squared @ gd + np.maximum(bd, GDN_BETA_MIN)
    root = np.sqrt(norm)
    out = xd * root if inverse else xd / root

    def backward(g):
        if inverse:
            t = g * xd / root
            grad_x = g * root + xd * (t @ gd.T)
            scale = 0.5
        else:
            t = g * xd / (norm * root)
            grad_x = g / root - xd * (t @ gd.T)
            scale = -0.5
        flat_t = t.reshape(-1, channels)
        return (
            grad_x if x.requires_grad else None,
            scale * flat_t.sum(axis=0) * floored if beta.requires_grad else None,
            scale * (squared.reshape(-1, channels).T @ flat_t) if gamma.requires_grad else None,
        )

    return make_result("igdn" if inverse else "gdn", (x, beta, gamma), out, backward)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with one slope per channel (last axis); slope 1 at zero."""
    xd, ad = x.data, slope.data
    if ad.shape != (xd.shape[-1],):
        raise ShapeError(f"PReLU slope shape {ad.shape} does not match {xd.shape[-1]} channels")
    positive = xd >= 0
    out = np.where(positive, xd, ad * xd)

    def backward(g):
        grad_slope = None
        if slope.requires_grad:
            grad_slope = np.where(positive, 0, g * xd).reshape(-1, xd.shape[-1]).sum(axis=0)
        return (
            np.where(positive, g, ad * g) if x.requires_grad else None,
            grad_slope,
        )

    return make_result("prelu", (x, slope), out, backward)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function; saturates without overflow for large |x|."""
    out = expit(x.data)

    def backward(g):
        return (g * out * (1 - out),)

    return make_result("sigmoid", (x,), out, backward)


def mse_loss(x: Tensor, x_hat: Tensor, reduction: str = "mean") -> Tensor:
    """
    Squared-error distortion between two same-shape tensors.

    Args:
        x: Reference
        x_hat: Reconstruction
        reduction: "mean" averages over every element; "per_image" sums each
            sample's squared error and averages over the batch axis

    Raises:
        ShapeError: On shape mismatch
    """
    if x.shape != x_hat.shape:
        raise ShapeError(f"mse_loss shape mismatch: {x.shape} vs {x_hat.shape}")
    if reduction not in ("mean", "per_image"):
        raise ValueError(f"Unknown reduction: {reduction}")
    diff = x_hat.data - x.data
    if reduction == "mean":
        count = diff.size
    else:
        count = diff.shape[0] if diff.ndim > 0 else 1
    out = np.asarray(np.sum(diff * diff) / count, dtype=diff.dtype)

    def backward(g):
        grad = (2 * g / count) * diff
        return (
            -grad if x.requires_grad else None,
            grad if x_hat.requires_grad else None,
        )

    return make_result("mse_loss", (x, x_hat), out, backward)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar <x, weights>; used to reduce non-scalar outputs in checks."""
    if weights.shape != x.shape:
        raise ShapeError(f"weights shape {weights.shape} does not match {x.shape}")
    out = np.asarray(np.sum(x.data * weights), dtype=x.dtype)

    def backward(g):
        return (g * weights,)

    return make_result("weighted_sum", (x,), out, backward)


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------

def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last (channel) axis."""
    if not tensors:
        raise ShapeError("concat_channels needs at least one tensor")
    leading = tensors[0].shape[:-1]
    for t in tensors:
        if t.shape[:-1] != leading:
            raise ShapeError(f"cannot concatenate {t.shape} with leading extents {leading}")
    if len(tensors) == 1:
        return tensors[0]
    out = np.concatenate([t.data for t in tensors], axis=-1)
    bounds = np.cumsum([t.shape[-1] for t in tensors])[:-1]

    def backward(g):
        pieces = np.split(g, bounds, axis=-1)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, tensors))

    return make_result("concat_channels", tuple(tensors), out, backward)


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    """Row-major reshape."""
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from e
    original = x.shape

    def backward(g):
        return (g.reshape(original),)

    return make_result("reshape", (x,), out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def backward(g):
        return (g if a.requires_grad else None, g if b.requires_grad else None)

    return make_result("add", (a, b), out, backward)


def zeros_like(x: Tensor) -> Tensor:
    return Tensor(np.zeros_like(x.data))


# ---------------------------------------------------------------------------
# Channel-side operations on interleaved (real, imaginary) rows
# ---------------------------------------------------------------------------

def power_normalize(x: Tensor) -> Tensor:
    """
    Scale every row of an N x 2k array so its k complex symbols have unit
    average power: y = sqrt(k) * v / ||v||.

    The output is computed and returned at channel precision (64-bit).

    Raises:
        ShapeError: If rows do not hold whole complex symbols
        DegenerateSignalError: If a row is identically zero
    """
    if x.ndim != 2 or x.shape[1] % 2:
        raise ShapeError(f"power_normalize expects N x 2k rows, got {x.shape}")
    xd = x.data.astype(CHANNEL_DTYPE)
    k = xd.shape[1] // 2
    norms = np.sqrt(np.sum(xd * xd, axis=1, keepdims=True))
    if np.any(norms == 0):
        raise DegenerateSignalError("cannot normalize an all-zero channel input")
    unit = xd / norms
    gain = np.sqrt(k)
    out = gain * unit

    def backward(g):
        radial = np.sum(g * unit, axis=1, keepdims=True)
        return (((gain / norms) * (g - unit * radial)).astype(x.dtype, copy=False),)

    return make_result("power_normalize", (x,), out, backward)


def cast(x: Tensor, dtype) -> Tensor:
    """Change precision; gradients flow back in the input's dtype."""
    if x.dtype == np.dtype(dtype):
        return x
    source = x.dtype
    out = x.data.astype(dtype)

    def backward(g):
        return (g.astype(source),)

    return make_result("cast", (x,), out, backward)


def complex_gain(x: Tensor, h: np.ndarray) -> Tensor:
    """
    Multiply each row's complex symbols by that row's complex gain h[i].

    Args:
        x: N x 2k interleaved (real, imaginary) rows
        h: Complex gains, shape (N,)
    """
    xd = x.data
    if xd.ndim != 2 or xd.shape[1] % 2 or h.shape != (xd.shape[0],):
        raise ShapeError(f"complex_gain expects N x 2k rows and N gains, got {xd.shape} and {h.shape}")
    hr = h.real.astype(xd.dtype)[:, None]
    hi = h.imag.astype(xd.dtype)[:, None]
    re, im = xd[:, 0::2], xd[:, 1::2]
    out = np.empty_like(xd)
    out[:, 0::2] = re * hr - im * hi
    out[:, 1::2] = re * hi + im * hr

    def backward(g):
        gr, gi = g[:, 0::2], g[:, 1::2]
        grad = np.empty_like(g)
        grad[:, 0::2] = gr * hr + gi * hi
        grad[:, 1::2] = gi * hr - gr * hi
        return (grad,)

    return make_result("complex_gain", (x,), out, backward)


def add_constant(x: Tensor, constant: Optional[np.ndarray]) -> Tensor:
    """x + constant where the constant carries no gradient (e.g. channel noise)."""
    if constant is None:
        return x
    return add(x, Tensor(constant.astype(x.dtype, copy=False)))
