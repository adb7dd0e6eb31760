"""Sequential network container, forward pass, and reverse-mode gradients.

A Network is an immutable-by-convention stack of layer specs plus parameter
arrays. Forward passes retain per-layer caches in a ForwardTrace so that
gradients to parameters, to intermediate activations, and to input pixels
can all be taken afterwards. A trailing Softmax layer, when present, is the
probability head; gradients are always seeded at the pre-softmax logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import layers as L
from .layers import Conv2D, Dense, Flatten, LayerSpec, MaxPool, ReLU, Softmax


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


INIT_SCHEMES = ("kaiming_uniform", "zeros")


@dataclass
class Network:
    """Ordered layer stack with per-layer parameter dicts (None where the
    layer has no parameters). Shapes are validated at construction."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int]
    num_classes: int
    params: list[dict[str, np.ndarray] | None]
    layer_shapes: list[tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.layers = tuple(self.layers)
        self.layer_shapes = validate_architecture(self.layers, self.input_shape, self.num_classes)
        expected = [L.param_shapes(s, in_shape) for s, in_shape in zip(self.layers, self.layer_shapes[:-1])]
        if len(self.params) != len(self.layers):
            raise ValueError("params list must align with layers")
        for i, (want, have) in enumerate(zip(expected, self.params)):
            if want is None:
                if have is not None:
                    raise ValueError(f"layer {i} takes no parameters")
                continue
            if have is None or set(have) != set(want):
                raise ValueError(f"layer {i} expects parameters {sorted(want)}")
            for key, shape in want.items():
                if have[key].shape != shape:
                    raise ValueError(f"layer {i} parameter {key}: expected shape {shape}, got {have[key].shape}")

    @property
    def n_parameters(self) -> int:
        return sum(p[k].size for p in self.params if p for k in p)

    def conv_layer_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.layers) if isinstance(s, Conv2D)]

    def clone(self) -> "Network":
        return Network(
            layers=self.layers,
            input_shape=self.input_shape,
            num_classes=self.num_classes,
            params=[None if p is None else {k: v.copy() for k, v in p.items()} for p in self.params],
        )

    def parameter_checksum(self) -> float:
        """Cheap content fingerprint used by purity tests."""
        total = 0.0
        for p in self.params:
            if p:
                for k in sorted(p):
                    total += float(np.sum(p[k] * p[k]))
        return total


def validate_architecture(
    specs: Sequence[LayerSpec], input_shape: tuple[int, int, int], num_classes: int
) -> list[tuple[int, ...]]:
    """Run the per-layer shape algebra over the whole stack. Returns the
    shape sequence [input, after layer 0, ..., after last layer]."""
    if len(input_shape) != 3 or any(d < 1 for d in input_shape):
        raise ValueError(f"input shape must be (channels, H, W), got {input_shape}")
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if not specs:
        raise ValueError("network needs at least one layer")
    shapes: list[tuple[int, ...]] = [tuple(input_shape)]
    for i, spec in enumerate(specs):
        L.validate_spec(spec)
        if isinstance(spec, Softmax) and i != len(specs) - 1:
            raise ValueError("softmax may only appear as the final layer")
        shapes.append(L.output_shape(spec, shapes[-1]))
    head = shapes[-2] if isinstance(specs[-1], Softmax) else shapes[-1]
    if head != (num_classes,):
        raise ValueError(f"final layer must emit ({num_classes},) logits, got {head}")
    return shapes


def build_network(
    specs: Sequence[LayerSpec],
    input_shape: tuple[int, int, int],
    num_classes: int,
    seed: int = 0,
    init: str = "kaiming_uniform",
) -> Network:
    """Construct a network with freshly initialized parameters.

    kaiming_uniform draws weights from U(+-sqrt(6/fan_in)); biases start at
    zero. The zeros scheme is mostly useful in tests.
    """
    if init not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {init!r}; expected one of {INIT_SCHEMES}")
    shapes = validate_architecture(specs, input_shape, num_classes)
    rng = np.random.default_rng(seed)
    params: list[dict[str, np.ndarray] | None] = []
    for spec, in_shape in zip(specs, shapes[:-1]):
        want = L.param_shapes(spec, in_shape)
        if want is None:
            params.append(None)
            continue
        if init == "zeros":
            params.append({k: np.zeros(shape) for k, shape in want.items()})
            continue
        wshape = want["w"]
        fan_in = int(np.prod(wshape[1:]))
        params.append({"w": _kaiming_uniform(rng, wshape, fan_in), "b": np.zeros(want["b"])})
    return Network(tuple(specs), tuple(input_shape), num_classes, params)


@dataclass
class ForwardTrace:
    """Everything one forward pass retained: per-layer activations (entry i
    is the input of layer i; the last entry is the network output), opaque
    backward caches, logits, and row-normalized probabilities."""

    activations: list[np.ndarray]
    caches: list[object]
    logits: np.ndarray
    probabilities: np.ndarray
    net: Network

    @property
    def batch_size(self) -> int:
        return self.activations[0].shape[0]


def forward(net: Network, batch: np.ndarray) -> ForwardTrace:
    """Run a (B, C, H, W) batch through the network.

    Rejects shape mismatches and non-finite inputs with a diagnostic.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[1:] != net.input_shape:
        raise ValueError(
            f"batch shape {batch.shape} does not match (B, {net.input_shape[0]}, "
            f"{net.input_shape[1]}, {net.input_shape[2]})"
        )
    if not np.all(np.isfinite(batch)):
        raise ValueError("batch contains non-finite values")

    activations = [batch]
    caches: list[object] = []
    x = batch
    logits = None
    for spec, p in zip(net.layers, net.params):
        if isinstance(spec, Conv2D):
            x, cache = L.conv2d_forward(x, p["w"], p["b"], spec.stride, spec.zero_padding)
        elif isinstance(spec, MaxPool):
            x, cache = L.maxpool_forward(x, spec.window, spec.stride)
        elif isinstance(spec, ReLU):
            x, cache = L.relu_forward(x)
        elif isinstance(spec, Flatten):
            cache = x.shape
            x = x.reshape(x.shape[0], -1)
        elif isinstance(spec, Dense):
            x, cache = L.dense_forward(x, p["w"], p["b"])
        elif isinstance(spec, Softmax):
            logits = x
            x = L.softmax(x)
            cache = None
        else:  # pragma: no cover - validate_architecture guards this
            raise TypeError(f"unknown layer {spec!r}")
        activations.append(x)
        caches.append(cache)
    if logits is None:
        logits = activations[-1]
    probabilities = L.softmax(logits) if not isinstance(net.layers[-1], Softmax) else activations[-1]
    return ForwardTrace(activations, caches, logits, probabilities, net)


def _check_trace(net: Network, trace: ForwardTrace) -> None:
    if trace.net is not net:
        raise ValueError("trace was produced by a different network")


def _backprop(
    net: Network,
    trace: ForwardTrace,
    dlogits: np.ndarray,
    stop_layer: int = -1,
    guided: bool = False,
    collect_params: bool = False,
):
    """Walk gradients from the logits back to the output of ``stop_layer``
    (-1 means all the way to the network input). Returns (grad, param_grads)
    where param_grads is None unless collect_params."""
    n = len(net.layers)
    last = n - 2 if isinstance(net.layers[-1], Softmax) else n - 1
    grad = dlogits
    param_grads: list[dict[str, np.ndarray] | None] | None = None
    if collect_params:
        param_grads = [None] * n
    for i in range(last, stop_layer, -1):
        spec = net.layers[i]
        cache = trace.caches[i]
        p = net.params[i]
        if isinstance(spec, Conv2D):
            grad, dp = L.conv2d_backward(grad, cache, p["w"])
            if collect_params:
                param_grads[i] = dp
        elif isinstance(spec, MaxPool):
            grad = L.maxpool_backward(grad, cache)
        elif isinstance(spec, ReLU):
            grad = L.relu_backward(grad, cache, guided=guided)
        elif isinstance(spec, Flatten):
            grad = grad.reshape(cache)
        elif isinstance(spec, Dense):
            grad, dp = L.dense_backward(grad, cache, p["w"])
            if collect_params:
                param_grads[i] = dp
        else:  # pragma: no cover
            raise TypeError(f"unexpected layer {spec!r} in backward walk")
    return grad, param_grads


def backward_to_input(
    net: Network, trace: ForwardTrace, class_index: int, relu_mode: str = "standard"
) -> np.ndarray:
    """Gradient of the chosen pre-softmax logit with respect to every input
    pixel, per sample. relu_mode 'guided' zeroes negative incoming gradients
    at each ReLU in addition to the standard gating."""
    _check_trace(net, trace)
    if not 0 <= class_index < net.num_classes:
        raise ValueError(f"class index {class_index} out of range [0, {net.num_classes})")
    if relu_mode not in ("standard", "guided"):
        raise ValueError(f"relu_mode must be 'standard' or 'guided', got {relu_mode!r}")
    dlogits = np.zeros_like(trace.logits)
    dlogits[:, class_index] = 1.0
    grad, _ = _backprop(net, trace, dlogits, stop_layer=-1, guided=(relu_mode == "guided"))
    return grad


def backward_to_layer(net: Network, trace: ForwardTrace, class_index: int, layer_index: int) -> np.ndarray:
    """Gradient of the chosen logit with respect to the output of layer
    ``layer_index`` (used by activation-weighting methods)."""
    _check_trace(net, trace)
    if not 0 <= class_index < net.num_classes:
        raise ValueError(f"class index {class_index} out of range [0, {net.num_classes})")
    dlogits = np.zeros_like(trace.logits)
    dlogits[:, class_index] = 1.0
    grad, _ = _backprop(net, trace, dlogits, stop_layer=layer_index)
    return grad


def backward_params(net: Network, trace: ForwardTrace, true_labels: np.ndarray):
    """Mean cross-entropy gradients for every parameter tensor.

    Returns a list aligned with net.params (None for parameterless layers).
    """
    _check_trace(net, trace)
    labels = np.asarray(true_labels)
    if labels.ndim != 1 or labels.shape[0] != trace.batch_size:
        raise ValueError(f"expected {trace.batch_size} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise ValueError(f"label out of range [0, {net.num_classes})")
    dlogits = softmax_cross_entropy_logit_grad(trace.probabilities, labels)
    _, param_grads = _backprop(net, trace, dlogits, stop_layer=-1, collect_params=True)
    return param_grads


def softmax_cross_entropy_logit_grad(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(logits) = (p - one_hot(y)) / B."""
    grad = probabilities.copy()
    grad[np.arange(len(labels)), labels] -= 1.0
    return grad / len(labels)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy computed from logits via log-sum-exp, so the value
    only becomes non-finite when the logits themselves do."""
    with np.errstate(invalid="ignore", over="ignore"):
        m = logits.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
        return float(np.mean(lse - logits[np.arange(len(labels)), labels]))


def predict(net: Network, image: np.ndarray) -> tuple[int, np.ndarray]:
    """Classify one (C, H, W) image. Ties resolve to the lowest class index."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape == net.input_shape:
        image = image[None]
    trace = forward(net, image)
    probs = trace.probabilities[0]
    return int(np.argmax(probs)), probs


def predict_batch(net: Network, batch: np.ndarray) -> np.ndarray:
    """Argmax labels for a (B, C, H, W) batch."""
    return forward(net, batch).probabilities.argmax(axis=1)
