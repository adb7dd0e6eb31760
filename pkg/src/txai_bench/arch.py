"""Named architectures the CLI can reference from config files."""

from __future__ import annotations

from .nn import Conv2D, Dense, Flatten, LayerSpec, MaxPool, Network, ReLU, Softmax, build_network


def cnn_small(num_classes: int) -> list[LayerSpec]:
    """Two conv blocks and a linear head; the default desk-scale model."""
    return [
        Conv2D(8, 3, 3, stride=1, zero_padding=1), ReLU(), MaxPool(2, 2),
        Conv2D(16, 3, 3, stride=1, zero_padding=1), ReLU(), MaxPool(2, 2),
        Flatten(), Dense(num_classes), Softmax(),
    ]


def cnn_tiny(num_classes: int) -> list[LayerSpec]:
    """Single conv block; used where training time matters more than accuracy."""
    return [
        Conv2D(6, 3, 3, stride=1, zero_padding=1), ReLU(), MaxPool(2, 2),
        Flatten(), Dense(num_classes), Softmax(),
    ]


def mlp(num_classes: int) -> list[LayerSpec]:
    return [Flatten(), Dense(32), ReLU(), Dense(num_classes), Softmax()]


ARCHITECTURES = {
    "cnn_small": cnn_small,
    "cnn_tiny": cnn_tiny,
    "mlp": mlp,
}


def build_architecture(
    arch_id: str,
    input_shape: tuple[int, int, int],
    num_classes: int,
    seed: int = 0,
    init: str = "kaiming_uniform",
) -> Network:
    if arch_id not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch_id!r}; known: {sorted(ARCHITECTURES)}")
    specs = ARCHITECTURES[arch_id](num_classes)
    return build_network(specs, input_shape, num_classes, seed=seed, init=init)
