"""Layer specs and their forward/backward kernels.

Layers are declarative dataclasses; the actual math lives in module-level
functions dispatched by spec type. Convolution is cross-correlation (no
kernel flip) with zero padding. Everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    zero_padding: int = 0


@dataclass(frozen=True)
class MaxPool:
    window: int
    stride: int


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    out_features: int


@dataclass(frozen=True)
class Softmax:
    pass


LayerSpec = Union[Conv2D, MaxPool, ReLU, Flatten, Dense, Softmax]

_LAYER_NAMES = {
    Conv2D: "conv2d",
    MaxPool: "maxpool",
    ReLU: "relu",
    Flatten: "flatten",
    Dense: "dense",
    Softmax: "softmax",
}


def layer_name(spec: LayerSpec) -> str:
    return _LAYER_NAMES[type(spec)]


def validate_spec(spec: LayerSpec) -> None:
    if isinstance(spec, Conv2D):
        if spec.out_channels < 1 or spec.kernel_h < 1 or spec.kernel_w < 1:
            raise ValueError(f"conv2d needs positive channels/kernel, got {spec}")
        if spec.stride < 1 or spec.zero_padding < 0:
            raise ValueError(f"conv2d needs stride >= 1 and padding >= 0, got {spec}")
    elif isinstance(spec, MaxPool):
        if spec.window < 1 or spec.stride < 1:
            raise ValueError(f"maxpool needs positive window/stride, got {spec}")
    elif isinstance(spec, Dense):
        if spec.out_features < 1:
            raise ValueError(f"dense needs out_features >= 1, got {spec}")


def output_shape(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Shape rule for one layer; raises ValueError when the layer cannot
    accept ``in_shape``. Used both by the static validator and, implicitly,
    by the kernels below (they must agree)."""
    if isinstance(spec, Conv2D):
        if len(in_shape) != 3:
            raise ValueError(f"conv2d expects (C,H,W) input, got {in_shape}")
        c, h, w = in_shape
        oh = (h + 2 * spec.zero_padding - spec.kernel_h) // spec.stride + 1
        ow = (w + 2 * spec.zero_padding - spec.kernel_w) // spec.stride + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"conv2d kernel {spec.kernel_h}x{spec.kernel_w} too large for input {in_shape}")
        return (spec.out_channels, oh, ow)
    if isinstance(spec, MaxPool):
        if len(in_shape) != 3:
            raise ValueError(f"maxpool expects (C,H,W) input, got {in_shape}")
        c, h, w = in_shape
        oh = (h - spec.window) // spec.stride + 1
        ow = (w - spec.window) // spec.stride + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"maxpool window {spec.window} too large for input {in_shape}")
        return (c, oh, ow)
    if isinstance(spec, ReLU):
        return in_shape
    if isinstance(spec, Flatten):
        return (int(np.prod(in_shape)),)
    if isinstance(spec, Dense):
        return (spec.out_features,)
    if isinstance(spec, Softmax):
        if len(in_shape) != 1:
            raise ValueError(f"softmax expects a flat input, got {in_shape}")
        return in_shape
    raise TypeError(f"unknown layer spec {spec!r}")


def param_shapes(spec: LayerSpec, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]] | None:
    if isinstance(spec, Conv2D):
        return {
            "w": (spec.out_channels, in_shape[0], spec.kernel_h, spec.kernel_w),
            "b": (spec.out_channels,),
        }
    if isinstance(spec, Dense):
        return {"w": (spec.out_features, int(np.prod(in_shape))), "b": (spec.out_features,)}
    return None


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _window_view(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Gather sliding windows of a (B,C,H,W) array into (B,C,kh,kw,oh,ow)."""
    b, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = x[:, :, u : u + stride * (oh - 1) + 1 : stride,
                                 v : v + stride * (ow - 1) + 1 : stride]
    return cols


def _scatter_windows(dcols: np.ndarray, in_shape: tuple[int, int, int, int], stride: int) -> np.ndarray:
    """Adjoint of _window_view: accumulate (B,C,kh,kw,oh,ow) back to (B,C,H,W)."""
    b, c, kh, kw, oh, ow = dcols.shape
    dx = np.zeros(in_shape, dtype=dcols.dtype)
    for u in range(kh):
        for v in range(kw):
            dx[:, :, u : u + stride * (oh - 1) + 1 : stride,
               v : v + stride * (ow - 1) + 1 : stride] += dcols[:, :, u, v]
    return dx


def conv2d_forward(x, w, b, stride, padding):
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    kh, kw = w.shape[2], w.shape[3]
    cols = _window_view(x, kh, kw, stride)
    bsz, c, _, _, oh, ow = cols.shape
    # im2col: one contiguous copy, then a single matmul
    mat = cols.transpose(0, 4, 5, 1, 2, 3).reshape(bsz * oh * ow, c * kh * kw)
    out = mat @ w.reshape(w.shape[0], -1).T
    out = out.reshape(bsz, oh, ow, w.shape[0]).transpose(0, 3, 1, 2) + b[None, :, None, None]
    cache = (mat, (bsz, c, oh, ow), x.shape, stride, padding)
    return np.ascontiguousarray(out), cache


def conv2d_backward(dout, cache, w):
    mat, (bsz, c, oh, ow), padded_shape, stride, padding = cache
    kh, kw = w.shape[2], w.shape[3]
    dmat_out = dout.transpose(0, 2, 3, 1).reshape(bsz * oh * ow, w.shape[0])
    dw = (dmat_out.T @ mat).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dmat = dmat_out @ w.reshape(w.shape[0], -1)
    dcols = dmat.reshape(bsz, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    dx = _scatter_windows(dcols, padded_shape, stride)
    if padding:
        dx = dx[:, :, padding:-padding, padding:-padding]
    return dx, {"w": dw, "b": db}


def maxpool_forward(x, window, stride):
    cols = _window_view(x, window, window, stride)
    b, c, _, _, oh, ow = cols.shape
    flat = cols.reshape(b, c, window * window, oh, ow)
    idx = flat.argmax(axis=2)
    out = np.take_along_axis(flat, idx[:, :, None], axis=2)[:, :, 0]
    cache = (idx, x.shape, window, stride)
    return out, cache


def maxpool_backward(dout, cache):
    idx, in_shape, window, stride = cache
    b, c, oh, ow = dout.shape
    dflat = np.zeros((b, c, window * window, oh, ow), dtype=dout.dtype)
    np.put_along_axis(dflat, idx[:, :, None], dout[:, :, None], axis=2)
    dcols = dflat.reshape(b, c, window, window, oh, ow)
    return _scatter_windows(dcols, in_shape, stride)


def relu_forward(x):
    return np.maximum(x, 0.0), x


def relu_backward(dout, x, guided=False):
    dx = dout * (x > 0)
    if guided:
        # guided rule: additionally block negative incoming gradients
        dx = dx * (dout > 0)
    return dx


def dense_forward(x, w, b):
    xf = x.reshape(x.shape[0], -1)
    return xf @ w.T + b, (xf, x.shape)


def dense_backward(dout, cache, w):
    xf, in_shape = cache
    dw = dout.T @ xf
    db = dout.sum(axis=0)
    dx = (dout @ w).reshape(in_shape)
    return dx, {"w": dw, "b": db}


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a (B, K) array. Non-finite logits yield
    NaN rows rather than warnings; training detects those via the loss."""
    with np.errstate(invalid="ignore"):
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)
