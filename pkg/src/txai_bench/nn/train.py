"""Mini-batch SGD training loop.

Deterministic given the config seed: shuffling is the only randomness and it
comes from a dedicated Generator. The input network is never mutated; the
trained copy is returned together with a per-epoch history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    Network,
    backward_params,
    cross_entropy_loss,
    forward,
)


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite; message names epoch/batch."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    init: str = "kaiming_uniform"
    momentum: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epoch count must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train(
    net: Network,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> tuple[Network, list[EpochStats]]:
    """SGD over cross-entropy. Returns (trained copy, per-epoch history).

    Loss/accuracy in the history are averaged over the pre-update forward
    passes of each epoch. Aborts with TrainingDiverged naming the epoch and
    batch if the loss stops being finite.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if len(images) == 0:
        raise ValueError("training set is empty")
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= net.num_classes:
        raise ValueError(f"label out of range [0, {net.num_classes})")

    net = net.clone()
    rng = np.random.default_rng(cfg.seed)
    velocity = [
        None if p is None else {k: np.zeros_like(v) for k, v in p.items()}
        for p in net.params
    ]
    history: list[EpochStats] = []
    n = len(images)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = images[idx], labels[idx]
            trace = forward(net, xb)
            loss = cross_entropy_loss(trace.logits, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            loss_sum += loss * len(idx)
            correct += int((trace.probabilities.argmax(axis=1) == yb).sum())
            grads = backward_params(net, trace, yb)
            with np.errstate(over="ignore", invalid="ignore"):
                for p, v, g in zip(net.params, velocity, grads):
                    if g is None:
                        continue
                    for key in p:
                        if cfg.momentum > 0.0:
                            v[key] = cfg.momentum * v[key] - cfg.learning_rate * g[key]
                            p[key] += v[key]
                        else:
                            p[key] -= cfg.learning_rate * g[key]
            if any(not np.isfinite(p[key]).all() for p in net.params if p for key in p):
                raise TrainingDiverged(
                    f"parameters became non-finite at epoch {epoch}, batch {start // cfg.batch_size}"
                )
        history.append(EpochStats(epoch, loss_sum / n, correct / n))
    return net, history
