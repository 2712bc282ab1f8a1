"""
Differentiable Operations
Convolutions, normalization, activations, reductions and the framed-spectrum path

Every function takes and returns Tensors; constant operands may be plain
arrays. Convolutions work on [batch x channels x time] layouts.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from core.exceptions import ShapeError, StatisticsError
from .tensor import Tensor, add, div, mul, neg, power

logger = logging.getLogger(__name__)

# Guard inside the complex modulus so its gradient exists at the origin
MODULUS_EPS = 1e-12

__all__ = [
    "as_tensor", "add", "mul", "div", "neg", "power",
    "exp", "log", "sqrt", "abs", "tanh", "sigmoid", "leaky_relu", "clamp",
    "sum", "mean", "reshape", "transpose", "pad1d", "crop", "concat", "expand_channels",
    "matmul", "dense", "conv1d", "conv_transpose1d", "batch_norm", "avg_pool1d",
    "frame1d", "rfft", "complex_abs", "stft_amplitude", "frame_convolve", "overlap_add",
    "conv_output_length", "MODULUS_EPS"
]


def as_tensor(x: Union[Tensor, np.ndarray, float]) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


# Elementwise

def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return Tensor.from_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g / (2.0 * out),))


def abs(x: Tensor) -> Tensor:  # noqa: A001
    return Tensor.from_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data).astype(x.data.dtype, copy=False)
    return Tensor.from_op(out, (x,), lambda g: (np.where(positive, g, slope * g),))


def clamp(x: Tensor, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    out = np.clip(x.data, low, high)
    inside = out == x.data
    return Tensor.from_op(out, (x,), lambda g: (g * inside,))


# Reductions and layout

def _axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _axes(axis, x.ndim)
    out = np.sum(x.data, axis=axes, keepdims=keepdims)

    def _backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(np.asarray(out), (x,), _backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    return sum(x, axis=axes, keepdims=keepdims) * (1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    return Tensor.from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(original),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def pad1d(x: Tensor, left: int, right: int = 0) -> Tensor:
    """Zero padding of the last axis"""
    if left == 0 and right == 0:
        return x
    width = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    length = x.shape[-1]
    return Tensor.from_op(np.pad(x.data, width), (x,), lambda g: (g[..., left:left + length],))


def crop(x: Tensor, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start + length) of the last axis"""
    total = x.shape[-1]
    if start < 0 or start + length > total:
        raise ShapeError(f"Crop [{start}, {start + length}) outside length {total}")

    def _backward(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[..., start:start + length] = g
        return (full,)

    return Tensor.from_op(x.data[..., start:start + length], (x,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor.from_op(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def expand_channels(x: Tensor, channels: int) -> Tensor:
    """Repeat a single-channel [B x 1 x T] tensor over `channels`"""
    if x.ndim != 3 or x.shape[1] != 1:
        raise ShapeError("expand_channels needs a [B x 1 x T] tensor", actual=x.shape)
    out = np.repeat(x.data, channels, axis=1)
    return Tensor.from_op(out, (x,), lambda g: (g.sum(axis=1, keepdims=True),))


def matmul(x: Tensor, w: Union[Tensor, np.ndarray]) -> Tensor:
    """[..., k] @ [k, m] -> [..., m]"""
    if x.shape[-1] != w.shape[0]:
        raise ShapeError("Inner dimensions differ", expected=x.shape[-1], actual=w.shape[0])
    w_data = w.data if isinstance(w, Tensor) else np.asarray(w, dtype=x.dtype)
    out = x.data @ w_data

    def _backward(g):
        grad_x = g @ w_data.T
        if isinstance(w, Tensor):
            grad_w = x.data.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return grad_x, grad_w
        return (grad_x,)

    parents = (x, w) if isinstance(w, Tensor) else (x,)
    return Tensor.from_op(out, parents, _backward)


def dense(x: Tensor, w: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, w)
    if bias is not None:
        out = _add_channel_bias(out, bias, axis=-1)
    return out


def _add_channel_bias(x: Tensor, bias: Tensor, axis: int) -> Tensor:
    axis = axis % x.ndim
    shape = [1] * x.ndim
    shape[axis] = x.shape[axis]
    reduce_axes = tuple(a for a in range(x.ndim) if a != axis)
    out = x.data + bias.data.reshape(shape)
    return Tensor.from_op(out, (x, bias), lambda g: (g, g.sum(axis=reduce_axes)))


# Convolutions

def conv_output_length(length: int, kernel: int, stride: int = 1, padding: int = 0, dilation: int = 1) -> int:
    return (length + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv1d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1
) -> Tensor:
    """Cross-correlation of [B x Cin x T] with [Cout x Cin/groups x K]"""
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeError("conv1d expects [B x C x T] input and [Cout x Cin x K] weights", actual=(x.shape, w.shape))
    if stride < 1 or dilation < 1 or groups < 1:
        raise ShapeError(f"Invalid stride {stride}, dilation {dilation} or groups {groups}")
    batch, c_in, length = x.shape
    c_out, c_in_group, kernel = w.shape
    if c_in != c_in_group * groups or c_out % groups:
        raise ShapeError("Channel counts incompatible with groups", expected=c_in_group * groups, actual=c_in)
    t_out = conv_output_length(length, kernel, stride, padding, dilation)
    if t_out < 1:
        raise ShapeError(f"Input of length {length} too short for kernel {kernel} with dilation {dilation}")

    x_pad = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    span = stride * (t_out - 1) + 1
    out_group = c_out // groups

    # im2col: [B, Cin, T', K] gathered one tap at a time
    cols = np.stack([x_pad[:, :, k * dilation:k * dilation + span:stride] for k in range(kernel)], axis=-1)
    cols_mat = (
        cols.reshape(batch, groups, c_in_group, t_out, kernel)
        .transpose(1, 0, 3, 2, 4)
        .reshape(groups, batch * t_out, c_in_group * kernel)
    )
    w_mat = w.data.reshape(groups, out_group, c_in_group * kernel).transpose(0, 2, 1)
    out = (
        np.matmul(cols_mat, w_mat)
        .reshape(groups, batch, t_out, out_group)
        .transpose(1, 0, 3, 2)
        .reshape(batch, c_out, t_out)
    )
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1)

    def _backward(g):
        g_mat = g.reshape(batch, groups, out_group, t_out).transpose(1, 0, 3, 2).reshape(groups, batch * t_out, out_group)
        grad_w = np.matmul(cols_mat.transpose(0, 2, 1), g_mat)
        grad_w = grad_w.transpose(0, 2, 1).reshape(c_out, c_in_group, kernel)
        grad_cols = (
            np.matmul(g_mat, w_mat.transpose(0, 2, 1))
            .reshape(groups, batch, t_out, c_in_group, kernel)
            .transpose(1, 0, 3, 2, 4)
            .reshape(batch, c_in, t_out, kernel)
        )
        grad_pad = np.zeros(x_pad.shape, dtype=g.dtype)
        for k in range(kernel):
            grad_pad[:, :, k * dilation:k * dilation + span:stride] += grad_cols[..., k]
        grad_x = grad_pad[:, :, padding:padding + length]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    parents = (x, w, bias) if bias is not None else (x, w)
    return Tensor.from_op(out, parents, _backward)


def conv_transpose1d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    output_length: Optional[int] = None
) -> Tensor:
    """Scatter-add upsampling of [B x Cin x T] with [Cin x Cout x K]

    `padding` samples are cropped from the left of the full scatter result and
    the output keeps `output_length` samples (default stride * T).
    """
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[0]:
        raise ShapeError("conv_transpose1d expects [B x Cin x T] and [Cin x Cout x K]", actual=(x.shape, w.shape))
    if stride < 1:
        raise ShapeError(f"Invalid stride {stride}")
    batch, c_in, length = x.shape
    _, c_out, kernel = w.shape
    full_length = (length - 1) * stride + kernel
    out_length = stride * length if output_length is None else int(output_length)
    if padding < 0 or padding + out_length > full_length:
        raise ShapeError(f"Crop [{padding}, {padding + out_length}) outside scatter length {full_length}")
    span = stride * (length - 1) + 1

    x_mat = x.data.transpose(0, 2, 1).reshape(batch * length, c_in)
    w_mat = w.data.reshape(c_in, c_out * kernel)
    taps = (x_mat @ w_mat).reshape(batch, length, c_out, kernel).transpose(0, 2, 1, 3)
    full = np.zeros((batch, c_out, full_length), dtype=taps.dtype)
    for k in range(kernel):
        full[:, :, k:k + span:stride] += taps[..., k]
    out = full[:, :, padding:padding + out_length]
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1)

    def _backward(g):
        g_full = np.zeros((batch, c_out, full_length), dtype=g.dtype)
        g_full[:, :, padding:padding + out_length] = g
        g_taps = np.stack([g_full[:, :, k:k + span:stride] for k in range(kernel)], axis=-1)
        g_mat = g_taps.transpose(0, 2, 1, 3).reshape(batch * length, c_out * kernel)
        grad_w = (x_mat.T @ g_mat).reshape(c_in, c_out, kernel)
        grad_x = (g_mat @ w_mat.T).reshape(batch, length, c_in).transpose(0, 2, 1)
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    parents = (x, w, bias) if bias is not None else (x, w)
    return Tensor.from_op(np.ascontiguousarray(out), parents, _backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5
) -> Tensor:
    """Per-channel normalization of [B x C x T]; running stats are updated in place"""
    if x.ndim != 3 or x.shape[1] != gamma.shape[0]:
        raise ShapeError("batch_norm channel count mismatch", expected=gamma.shape, actual=x.shape)
    shape = (1, x.shape[1], 1)

    if training:
        if x.shape[0] < 2:
            raise StatisticsError("Batch normalization in train mode needs a batch of at least 2")
        count = x.shape[0] * x.shape[2]
        batch_mean = x.data.mean(axis=(0, 2))
        batch_var = x.data.var(axis=(0, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * batch_mean
        running_var *= 1.0 - momentum
        running_var += momentum * batch_var * count / max(count - 1, 1)
        inv_std = 1.0 / np.sqrt(batch_var + eps)
        x_hat = (x.data - batch_mean.reshape(shape)) * inv_std.reshape(shape)
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.data - running_mean.reshape(shape)) * inv_std.reshape(shape)
    x_hat = x_hat.astype(x.dtype, copy=False)
    out = gamma.data.reshape(shape) * x_hat + beta.data.reshape(shape)

    def _backward(g):
        grad_gamma = (g * x_hat).sum(axis=(0, 2))
        grad_beta = g.sum(axis=(0, 2))
        g_hat = g * gamma.data.reshape(shape)
        if training:
            n = x.shape[0] * x.shape[2]
            grad_x = (inv_std.reshape(shape) / n) * (
                n * g_hat
                - g_hat.sum(axis=(0, 2), keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=(0, 2), keepdims=True)
            )
        else:
            grad_x = g_hat * inv_std.reshape(shape)
        return grad_x.astype(g.dtype, copy=False), grad_gamma, grad_beta

    return Tensor.from_op(out, (x, gamma, beta), _backward)


def avg_pool1d(x: Tensor, factor: int = 2) -> Tensor:
    """Non-overlapping mean over `factor` samples; a trailing remainder is dropped"""
    length = x.shape[-1] // factor
    if length < 1:
        raise ShapeError(f"Signal of length {x.shape[-1]} too short to pool by {factor}")
    used = length * factor
    out = x.data[..., :used].reshape(x.shape[:-1] + (length, factor)).mean(axis=-1)

    def _backward(g):
        grad = np.zeros(x.shape, dtype=g.dtype)
        grad[..., :used] = np.repeat(g, factor, axis=-1) / factor
        return (grad,)

    return Tensor.from_op(out, (x,), _backward)


# Framed spectra

def frame1d(x: Tensor, size: int, hop: int) -> Tensor:
    """Frames of the last axis with a zero-padded tail: [..., frames, size]"""
    length = x.shape[-1]
    frames = 1 if length <= size else -(-(length - size) // hop) + 1
    padded_length = (frames - 1) * hop + size
    width = [(0, 0)] * (x.ndim - 1) + [(0, padded_length - length)]
    padded = np.pad(x.data, width)
    out = np.ascontiguousarray(sliding_window_view(padded, size, axis=-1)[..., ::hop, :])

    def _backward(g):
        return (_overlap_add(g, hop)[..., :length],)

    return Tensor.from_op(out, (x,), _backward)


def _overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    count, size = frames.shape[-2], frames.shape[-1]
    total = (count - 1) * hop + size
    out = np.zeros(frames.shape[:-2] + (total,), dtype=frames.dtype)
    if size % hop == 0:
        # each frame is size/hop whole blocks
        blocks = size // hop
        grid = out.reshape(frames.shape[:-2] + (count - 1 + blocks, hop))
        split = frames.reshape(frames.shape[:-2] + (count, blocks, hop))
        for j in range(blocks):
            grid[..., j:j + count, :] += split[..., j, :]
        return out
    if count <= size:
        for f in range(count):
            out[..., f * hop:f * hop + size] += frames[..., f, :]
    else:
        span = (count - 1) * hop + 1
        for k in range(size):
            out[..., k:k + span:hop] += frames[..., :, k]
    return out


def overlap_add(x: Tensor, hop: int) -> Tensor:
    """Sum frames [..., frames, size] placed every `hop` samples"""
    count, size = x.shape[-2], x.shape[-1]
    out = _overlap_add(x.data, hop)

    def _backward(g):
        padded_view = sliding_window_view(g, size, axis=-1)[..., ::hop, :][..., :count, :]
        return (np.ascontiguousarray(padded_view),)

    return Tensor.from_op(out, (x,), _backward)


def rfft(x: Tensor) -> Tensor:
    """Real DFT of the last axis as [..., bins, 2] (real, imaginary)"""
    n = x.shape[-1]
    spectrum = np.fft.rfft(x.data, axis=-1)
    out = np.stack([spectrum.real, spectrum.imag], axis=-1).astype(x.dtype, copy=False)
    bins = spectrum.shape[-1]

    def _backward(g):
        full = np.zeros(g.shape[:-2] + (n,), dtype=np.complex128)
        full[..., :bins] = g[..., 0] + 1j * g[..., 1]
        return ((np.fft.ifft(full, axis=-1).real * n).astype(g.dtype, copy=False),)

    return Tensor.from_op(out, (x,), _backward)


def complex_abs(z: Tensor, eps: float = MODULUS_EPS) -> Tensor:
    """sqrt(re^2 + im^2 + eps^2) of a [..., 2] tensor"""
    re, im = z.data[..., 0], z.data[..., 1]
    out = np.sqrt(re * re + im * im + eps * eps)

    def _backward(g):
        scale = g / out
        return (np.stack([scale * re, scale * im], axis=-1),)

    return Tensor.from_op(out, (z,), _backward)


def stft_amplitude(x: Tensor, n: int, window: np.ndarray) -> Tensor:
    """|STFT| of the last axis with hop n/4: frame, taper, DFT, modulus"""
    frames = frame1d(x, n, n // 4)
    tapered = mul(frames, np.asarray(window, dtype=x.dtype))
    return complex_abs(rfft(tapered))


def frame_convolve(h: Tensor, noise: np.ndarray) -> Tensor:
    """Full linear convolution per frame of filters [..., K] with constant noise [..., L]"""
    noise = np.asarray(noise, dtype=h.dtype)
    if h.shape[:-1] != noise.shape[:-1]:
        raise ShapeError("Filter and noise frames differ", expected=h.shape[:-1], actual=noise.shape[:-1])
    taps = h.shape[-1]
    width = [(0, 0)] * (noise.ndim - 1) + [(taps - 1, taps - 1)]
    # toeplitz[..., i, j] = noise[..., i - j]
    toeplitz = sliding_window_view(np.pad(noise, width), taps, axis=-1)[..., ::-1]
    out = np.einsum("...ij,...j->...i", toeplitz, h.data)
    return Tensor.from_op(out, (h,), lambda g: (np.einsum("...ij,...i->...j", toeplitz, g),))


