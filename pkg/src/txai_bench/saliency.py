"""Saliency methods behind one interface.

Gradient-based: plain input gradients, guided input gradients, activation
weighting over a conv layer, and the elementwise fusion of the last two.
Perturbation-based: sliding-window occlusion, grid feature ablation, and a
local linear surrogate fit on segment on/off samples.

Every method returns a SaliencyMap: nonnegative (H, W) scores max-normalized
to 1 (unless identically zero), the method id, the explained class, and the
wall-clock seconds the computation took. Gradient methods differentiate the
pre-softmax logit of the target class. Perturbation methods only ever see an
InferenceView, which exposes forward probabilities and nothing else.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .nn import Network, backward_to_input, backward_to_layer, forward

METHOD_IDS = ("bp", "gbp", "gcam", "ggcam", "occ", "fa", "lime")

# perturbed samples are forwarded in fixed-size chunks so the evaluation
# path is identical no matter how many samples a method draws
_FORWARD_CHUNK = 64


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (H, W), in [0, 1]
    method: str
    target_class: int
    wall_clock_seconds: float


@dataclass(frozen=True)
class MethodConfig:
    """Per-method knobs, with defaults sized for 28x28 inputs."""

    occ_window: int = 4
    occ_stride: int = 2
    occ_baseline: float = 0.0
    fa_cells: int = 7
    fa_baseline: float = 0.0
    lime_segments: int = 7
    lime_samples: int = 500
    lime_kernel_width: float | None = None  # None: 0.25 * segment count
    lime_ridge: float = 1e-3
    lime_baseline: float = 0.0
    lime_seed: int = 0
    gcam_layer: int | None = None  # None: last conv layer

    def __post_init__(self):
        if self.occ_window < 1 or self.occ_stride < 1:
            raise ValueError("occlusion window/stride must be positive")
        if self.fa_cells < 1 or self.lime_segments < 1:
            raise ValueError("grid cells must be positive")
        if self.lime_samples < self.lime_segments ** 2 + 1:
            raise ValueError("sample count must exceed the segment count")
        if self.lime_ridge <= 0:
            raise ValueError("ridge strength must be positive")

    def kernel_width(self) -> float:
        if self.lime_kernel_width is not None:
            return self.lime_kernel_width
        return 0.25 * self.lime_segments ** 2


class InferenceView:
    """Forward-only handle on a model; what perturbation methods receive."""

    def __init__(self, net: Network):
        self._net = net
        self.num_classes = net.num_classes
        self.input_shape = net.input_shape

    def probabilities(self, batch: np.ndarray) -> np.ndarray:
        out = np.empty((len(batch), self.num_classes))
        for start in range(0, len(batch), _FORWARD_CHUNK):
            chunk = batch[start : start + _FORWARD_CHUNK]
            out[start : start + len(chunk)] = forward(self._net, chunk).probabilities
        return out


def as_inference_view(model: Network | InferenceView) -> InferenceView:
    return model if isinstance(model, InferenceView) else InferenceView(model)


def _normalized(values: np.ndarray) -> np.ndarray:
    peak = float(values.max())
    return values / peak if peak > 0 else values


def _require_network(model, method: str) -> Network:
    if not isinstance(model, Network):
        raise TypeError(f"{method} needs gradient access; an inference-only view is not enough")
    return model


def _check_image(image: np.ndarray, shape) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != tuple(shape):
        raise ValueError(f"image shape {image.shape} does not match model input {tuple(shape)}")
    return image


# --------------------------------------------------------------------------
# gradient methods
# --------------------------------------------------------------------------

def _input_gradient(net: Network, image: np.ndarray, target: int, guided: bool) -> np.ndarray:
    trace = forward(net, image[None])
    grad = backward_to_input(net, trace, target, relu_mode="guided" if guided else "standard")
    return np.abs(grad[0]).max(axis=0)  # channel reduction: max |gradient|


def bp_map(net, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    net = _require_network(net, "bp")
    image = _check_image(image, net.input_shape)
    t0 = time.perf_counter()
    values = _normalized(_input_gradient(net, image, target, guided=False))
    return SaliencyMap(values, "bp", target, time.perf_counter() - t0)


def gbp_map(net, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    net = _require_network(net, "gbp")
    image = _check_image(image, net.input_shape)
    t0 = time.perf_counter()
    values = _normalized(_input_gradient(net, image, target, guided=True))
    return SaliencyMap(values, "gbp", target, time.perf_counter() - t0)


def bilinear_upsample(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear interpolation of a 2-D array."""
    h, w = values.shape
    if (h, w) == (out_h, out_w):
        return values.copy()
    rows = np.linspace(0.0, h - 1, out_h) if h > 1 else np.zeros(out_h)
    cols = np.linspace(0.0, w - 1, out_w) if w > 1 else np.zeros(out_w)
    r0 = np.clip(np.floor(rows).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(cols).astype(int), 0, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = values[np.ix_(r0, c0)] * (1 - fc) + values[np.ix_(r0, c1)] * fc
    bot = values[np.ix_(r1, c0)] * (1 - fc) + values[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def resolve_gcam_layer(net: Network, cfg: MethodConfig) -> int:
    conv_layers = net.conv_layer_indices()
    if not conv_layers:
        raise ValueError("activation weighting needs at least one conv layer")
    if cfg.gcam_layer is None:
        return conv_layers[-1]
    if cfg.gcam_layer not in conv_layers:
        raise ValueError(f"layer {cfg.gcam_layer} is not a conv layer (conv layers: {conv_layers})")
    return cfg.gcam_layer


def gcam_raw(net: Network, image: np.ndarray, target: int, cfg: MethodConfig = MethodConfig()) -> np.ndarray:
    """Pre-normalization activation-weighted map, upsampled to input size.

    Channel weights are the spatial means of the logit gradient at the chosen
    conv layer; the weighted activation sum is clamped at zero and then
    bilinearly upsampled. ggcam_map multiplies exactly this array into the
    guided gradient map, so tests can recompose it.
    """
    layer = resolve_gcam_layer(net, cfg)
    trace = forward(net, image[None])
    activations = trace.activations[layer + 1][0]  # (K, h, w)
    grads = backward_to_layer(net, trace, target, layer)[0]
    weights = grads.mean(axis=(1, 2))
    combined = np.maximum(np.tensordot(weights, activations, axes=(0, 0)), 0.0)
    return bilinear_upsample(combined, net.input_shape[1], net.input_shape[2])


def gcam_map(net, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    net = _require_network(net, "gcam")
    image = _check_image(image, net.input_shape)
    t0 = time.perf_counter()
    values = _normalized(gcam_raw(net, image, target, cfg))
    return SaliencyMap(values, "gcam", target, time.perf_counter() - t0)


def ggcam_map(net, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    """Elementwise product of the guided gradient map and the raw
    activation-weighted map, then normalized."""
    net = _require_network(net, "ggcam")
    image = _check_image(image, net.input_shape)
    t0 = time.perf_counter()
    guided = _normalized(_input_gradient(net, image, target, guided=True))
    values = _normalized(guided * gcam_raw(net, image, target, cfg))
    return SaliencyMap(values, "ggcam", target, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# perturbation methods
# --------------------------------------------------------------------------

def _window_starts(dim: int, window: int, stride: int) -> list[int]:
    return list(range(0, dim - window + 1, stride))


def occlusion_map(model, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    """Slide a baseline-filled window; a pixel's score is the mean drop in
    the target probability over every window that covers it (clamped at 0).
    """
    view = as_inference_view(model)
    image = _check_image(image, view.input_shape)
    _, h, w = view.input_shape
    if cfg.occ_window > h or cfg.occ_window > w:
        raise ValueError(f"occlusion window {cfg.occ_window} exceeds image dims {h}x{w}")
    if cfg.occ_stride > cfg.occ_window:
        warnings.warn(
            f"occlusion stride {cfg.occ_stride} exceeds window {cfg.occ_window}; "
            "some pixels are never occluded and score zero",
            stacklevel=2,
        )
    t0 = time.perf_counter()
    starts = [(r, c) for r in _window_starts(h, cfg.occ_window, cfg.occ_stride)
              for c in _window_starts(w, cfg.occ_window, cfg.occ_stride)]
    batch = np.repeat(image[None], len(starts), axis=0)
    for k, (r, c) in enumerate(starts):
        batch[k, :, r : r + cfg.occ_window, c : c + cfg.occ_window] = cfg.occ_baseline
    p0 = float(view.probabilities(image[None])[0, target])
    drops = p0 - view.probabilities(batch)[:, target]
    score_sum = np.zeros((h, w))
    cover = np.zeros((h, w))
    for k, (r, c) in enumerate(starts):
        score_sum[r : r + cfg.occ_window, c : c + cfg.occ_window] += drops[k]
        cover[r : r + cfg.occ_window, c : c + cfg.occ_window] += 1.0
    with np.errstate(invalid="ignore"):
        mean = np.where(cover > 0, score_sum / np.maximum(cover, 1.0), 0.0)
    values = _normalized(np.maximum(mean, 0.0))
    return SaliencyMap(values, "occ", target, time.perf_counter() - t0)


def _grid_cells(dim: int, cells: int) -> list[tuple[int, int]]:
    """Split [0, dim) into `cells` spans; the last one absorbs the remainder."""
    base = dim // cells
    spans = []
    for i in range(cells):
        lo = i * base
        hi = dim if i == cells - 1 else (i + 1) * base
        spans.append((lo, hi))
    return spans


def feature_ablation_map(model, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    """Ablate each grid cell to the baseline once; every pixel inherits its
    cell's probability drop."""
    view = as_inference_view(model)
    image = _check_image(image, view.input_shape)
    _, h, w = view.input_shape
    t0 = time.perf_counter()
    rows = _grid_cells(h, cfg.fa_cells)
    cols = _grid_cells(w, cfg.fa_cells)
    groups = [(r0, r1, c0, c1) for r0, r1 in rows for c0, c1 in cols]
    batch = np.repeat(image[None], len(groups), axis=0)
    for k, (r0, r1, c0, c1) in enumerate(groups):
        batch[k, :, r0:r1, c0:c1] = cfg.fa_baseline
    p0 = float(view.probabilities(image[None])[0, target])
    drops = p0 - view.probabilities(batch)[:, target]
    values = np.zeros((h, w))
    for k, (r0, r1, c0, c1) in enumerate(groups):
        values[r0:r1, c0:c1] = drops[k]
    values = _normalized(np.maximum(values, 0.0))
    return SaliencyMap(values, "fa", target, time.perf_counter() - t0)


def fit_weighted_ridge(design: np.ndarray, response: np.ndarray, weights: np.ndarray, ridge: float) -> np.ndarray:
    """Solve the sample-weighted ridge regression with an unpenalized
    intercept; returns the feature coefficients (intercept dropped)."""
    n, k = design.shape
    z = np.hstack([np.ones((n, 1)), design])
    wz = z * weights[:, None]
    gram = z.T @ wz
    penalty = np.eye(k + 1) * ridge
    penalty[0, 0] = 0.0
    beta = np.linalg.solve(gram + penalty, wz.T @ response)
    return beta[1:]


def lime_map(model, image, target: int, cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    """Fit a local linear surrogate over grid segments.

    Draws on/off segment vectors (off segments filled with the baseline),
    queries the model's target probability for each, and fits a weighted
    ridge regression; sample weights decay with the squared hamming distance
    from the all-on vector. A segment's pixels score its coefficient,
    clamped at zero.
    """
    view = as_inference_view(model)
    image = _check_image(image, view.input_shape)
    _, h, w = view.input_shape
    t0 = time.perf_counter()
    rows = _grid_cells(h, cfg.lime_segments)
    cols = _grid_cells(w, cfg.lime_segments)
    segments = [(r0, r1, c0, c1) for r0, r1 in rows for c0, c1 in cols]
    n_seg = len(segments)
    rng = np.random.default_rng(cfg.lime_seed)
    design = rng.integers(0, 2, size=(cfg.lime_samples, n_seg)).astype(np.float64)
    batch = np.repeat(image[None], cfg.lime_samples, axis=0)
    for s, (r0, r1, c0, c1) in enumerate(segments):
        off = design[:, s] == 0.0
        batch[off, :, r0:r1, c0:c1] = cfg.lime_baseline
    response = view.probabilities(batch)[:, target]
    distance = n_seg - design.sum(axis=1)
    kw = cfg.kernel_width()
    weights = np.exp(-(distance ** 2) / (kw * kw))
    coef = fit_weighted_ridge(design, response, weights, cfg.lime_ridge)
    values = np.zeros((h, w))
    for s, (r0, r1, c0, c1) in enumerate(segments):
        values[r0:r1, c0:c1] = max(coef[s], 0.0)
    values = _normalized(values)
    return SaliencyMap(values, "lime", target, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

_METHODS = {
    "bp": bp_map,
    "gbp": gbp_map,
    "gcam": gcam_map,
    "ggcam": ggcam_map,
    "occ": occlusion_map,
    "fa": feature_ablation_map,
    "lime": lime_map,
}

FORWARD_METHODS = ("occ", "fa", "lime")
BACKWARD_METHODS = ("bp", "gbp", "gcam", "ggcam")


def explain(model: Network, image: np.ndarray, target: int, method: str,
            cfg: MethodConfig = MethodConfig()) -> SaliencyMap:
    """Run one method by id; perturbation methods receive only an
    inference view of the model."""
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}; known: {sorted(_METHODS)}")
    if method in FORWARD_METHODS:
        return _METHODS[method](as_inference_view(model), image, target, cfg)
    return _METHODS[method](model, image, target, cfg)
