# misr/neuralnet/layers.py
"""
Convolution, transposed convolution, ReLU, channel averaging and the masked
MSE loss, each as a raw array kernel plus a Tensor op wiring its backward.
The registered loss scores a prediction the way cPSNR lines it up: centre
crop, best integer offset of the target.

Weight layouts follow the usual convention: conv weights are
(out_channels, in_channels, k, k), transposed-conv weights are
(in_channels, out_channels, k, k). A transposed convolution is the adjoint
of the strided convolution sharing its weights, which is how each kernel's
input gradient is computed from the other.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from misr.errors import EmptyClearError, ShapeError
from misr.metric import BORDER
from misr.neuralnet.tensor import Tensor

logger = logging.getLogger(__name__)


def _windows(x: np.ndarray, k: int, stride: int, padding: int) -> np.ndarray:
    """(B, C, out_h, out_w, k, k) read-only view of every receptive field."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def _check_conv_shapes(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray], in_axis: int, out_axis: int):
    if x.ndim != 4 or w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"expected 4-D input and square 4-D kernel, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[in_axis]:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel {w.shape} expects {w.shape[in_axis]}")
    if b is not None and b.shape != (w.shape[out_axis],):
        raise ShapeError(f"bias {b.shape} does not match {w.shape[out_axis]} output channels")


def _scatter(y: np.ndarray, w: np.ndarray, stride: int, padding: int, out_hw: Optional[Tuple[int, int]] = None):
    """Transposed correlation of y (B, Ci, H, W) with w (Ci, Co, k, k)."""
    batch, _, h, wd = y.shape
    k = w.shape[2]
    full_h, full_w = (h - 1) * stride + k, (wd - 1) * stride + k
    out_h, out_w = out_hw if out_hw is not None else (full_h - 2 * padding, full_w - 2 * padding)
    full = np.zeros(
        (batch, w.shape[1], max(full_h, padding + out_h), max(full_w, padding + out_w)),
        dtype=np.result_type(y, w),
    )
    span_h, span_w = stride * (h - 1) + 1, stride * (wd - 1) + 1
    for kh in range(k):
        for kw in range(k):
            contrib = np.tensordot(y, w[:, :, kh, kw], axes=([1], [0]))
            full[:, :, kh:kh + span_h:stride, kw:kw + span_w:stride] += contrib.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(full[:, :, padding:padding + out_h, padding:padding + out_w])


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray], stride: int = 1, padding: int = 0):
    _check_conv_shapes(x, w, b, in_axis=1, out_axis=0)
    out = np.tensordot(_windows(x, w.shape[2], stride, padding), w, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0,
                    need_dx: bool = True):
    """Returns (dx, dw, db); dx is None when need_dx is False."""
    dw = np.tensordot(dout, _windows(x, w.shape[2], stride, padding), axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    dx = _scatter(dout, w, stride, padding, out_hw=x.shape[2:]) if need_dx else None
    return dx, dw, db


def deconv2d_forward(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray], stride: int = 3, padding: int = 3):
    _check_conv_shapes(x, w, b, in_axis=0, out_axis=1)
    out = _scatter(x, w, stride, padding)
    if b is not None:
        out += b[None, :, None, None]
    return out


def deconv2d_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray, stride: int = 3, padding: int = 3,
                      need_dx: bool = True):
    win = _windows(dout, w.shape[2], stride, padding)
    dw = np.tensordot(x, win, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    dx = None
    if need_dx:
        dx = np.ascontiguousarray(np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2))
    return dx, dw, db


# ---- Tensor ops ----

def same_padding(k: int) -> int:
    return (k - 1) // 2


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: Optional[int] = None) -> Tensor:
    pad = same_padding(w.shape[2]) if padding is None else padding
    out = conv2d_forward(x.data, w.data, b.data, stride, pad)

    def backward(g):
        return conv2d_backward(g, x.data, w.data, stride, pad, need_dx=x.requires_grad)

    return Tensor(out, parents=(x, w, b), backward=backward)


def deconv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 3, padding: int = 3) -> Tensor:
    out = deconv2d_forward(x.data, w.data, b.data, stride, padding)

    def backward(g):
        return deconv2d_backward(g, x.data, w.data, stride, padding, need_dx=x.requires_grad)

    return Tensor(out, parents=(x, w, b), backward=backward)


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return Tensor(np.where(active, x.data, 0).astype(x.dtype), parents=(x,), backward=lambda g: (g * active,))


def channel_mean(x: Tensor) -> Tensor:
    """Fixed average over the channel axis: (B, C, H, W) -> (B, 1, H, W)."""
    n = x.shape[1]

    def backward(g):
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)

    return Tensor(x.data.mean(axis=1, keepdims=True), parents=(x,), backward=backward)


def masked_mse_loss(pred: Tensor, target: np.ndarray, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Mean over samples of the mean squared residual over each sample's clear
    target pixels. pred is (B, 1, H, W), target and mask are (B, H, W); a
    missing mask counts every pixel. Samples without a clear pixel are
    dropped from the batch with a warning.
    """
    target = np.asarray(target, dtype=pred.dtype)
    if pred.data.ndim != 4 or pred.shape[1] != 1 or pred.data[:, 0].shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} does not match target {target.shape}")
    residual = pred.data[:, 0] - target
    weight = np.ones(residual.shape, dtype=pred.dtype) if mask is None else np.asarray(mask, dtype=pred.dtype)
    if weight.shape != residual.shape:
        raise ShapeError(f"mask {weight.shape} does not match target {residual.shape}")

    counts = weight.sum(axis=(1, 2))
    valid = counts > 0
    if not valid.all():
        logger.warning(f"skipping {int((~valid).sum())} sample(s) without clear target pixels")
    if not valid.any():
        raise EmptyClearError("no sample in the batch has a clear target pixel")

    # per-pixel weight 1/(|clear_i| * n_valid) on clear pixels of valid samples
    scale = np.where(valid, 1.0 / np.where(valid, counts, 1.0), 0.0) / valid.sum()
    weight = weight * scale[:, None, None].astype(pred.dtype)
    loss = np.sum(weight * residual * residual, dtype=pred.dtype)

    def backward(g):
        return ((2.0 * g * weight * residual)[:, None].astype(pred.dtype),)

    return Tensor(loss, parents=(pred,), backward=backward)


def crop_border(x: Tensor, border: int) -> Tensor:
    """Drop `border` pixels from every side of the spatial axes."""
    h, w = x.shape[2:]
    if h <= 2 * border or w <= 2 * border:
        raise ShapeError(f"cannot crop {border} pixels per side from {h}x{w}")

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, :, border:h - border, border:w - border] = g
        return (full,)

    return Tensor(np.ascontiguousarray(x.data[:, :, border:h - border, border:w - border]), parents=(x,), backward=backward)


def best_offsets(inner: np.ndarray, target: np.ndarray, clear: np.ndarray, border: int) -> np.ndarray:
    """
    (B, 2) offsets (u, v) in {0..2*border}^2 at which each target crop fits the
    border-cropped prediction best, by plain MSE over clear pixels. Ties keep
    the smallest v, then the smallest u. A sample with no clear pixel keeps
    the centre offset.
    """
    batch, h, w = inner.shape
    inner = inner.astype(np.float64)
    best = np.full(batch, np.inf)
    offsets = np.full((batch, 2), border, dtype=np.intp)
    for v in range(2 * border + 1):
        for u in range(2 * border + 1):
            m = clear[:, v:v + h, u:u + w]
            r = (target[:, v:v + h, u:u + w] - inner) * m
            counts = m.sum(axis=(1, 2))
            mse = np.where(counts > 0, (r * r).sum(axis=(1, 2)) / np.maximum(counts, 1), np.inf)
            better = mse < best
            best[better] = mse[better]
            offsets[better] = (u, v)
    return offsets


def registered_mse_loss(pred: Tensor, target: np.ndarray, mask: Optional[np.ndarray] = None,
                        border: int = BORDER) -> Tensor:
    """
    masked_mse_loss after integer registration: the prediction loses `border`
    pixels per side and each target is cropped where it fits that prediction
    best, the same window the score searches. Offsets carry no gradient.
    """
    target = np.asarray(target, dtype=np.float64)
    if pred.data.ndim != 4 or pred.shape[1] != 1 or pred.data[:, 0].shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} does not match target {target.shape}")
    clear = np.ones(target.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if clear.shape != target.shape:
        raise ShapeError(f"mask {clear.shape} does not match target {target.shape}")

    inner = crop_border(pred, border)
    h, w = inner.shape[2:]
    offsets = best_offsets(inner.data[:, 0], target, clear, border)
    aligned = np.stack([t[v:v + h, u:u + w] for t, (u, v) in zip(target, offsets)])
    aligned_clear = np.stack([c[v:v + h, u:u + w] for c, (u, v) in zip(clear, offsets)])
    return masked_mse_loss(inner, aligned, aligned_clear)
