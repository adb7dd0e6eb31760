"""Trigger construction, image stamping, dataset poisoning, and backdoor
training.

A trigger is described declaratively (pattern, size, location, alpha) and
materialized into a mask/pattern pair. Stamping blends the pattern into an
image through the mask: out = (1 - mask) * image + mask * pattern, with the
mask broadcast across channels. Binary masks make stamping idempotent and
strictly local to the mask support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .localize import BoundingBox, support_box
from .nn import Network, TrainConfig, predict_batch, train


# --------------------------------------------------------------------------
# trigger declaration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolidPattern:
    color: tuple[float, ...] = (1.0,)
    kind: str = field(default="solid", init=False)


@dataclass(frozen=True)
class CheckerPattern:
    color_a: tuple[float, ...] = (1.0,)
    color_b: tuple[float, ...] = (0.0,)
    cell: int = 2
    kind: str = field(default="checker", init=False)


@dataclass(frozen=True)
class ShapePattern:
    shape: Literal["square", "circle", "cross"] = "square"
    color: tuple[float, ...] = (1.0,)
    kind: str = field(default="shape", init=False)


Pattern = SolidPattern | CheckerPattern | ShapePattern


@dataclass(frozen=True)
class CornerLocation:
    """Bottom-right corner placement."""
    kind: str = field(default="corner", init=False)


@dataclass(frozen=True)
class FixedLocation:
    row: int
    col: int
    kind: str = field(default="fixed", init=False)


@dataclass(frozen=True)
class RandomLocation:
    """Drawn uniformly over valid placements, one draw per stamped image."""
    kind: str = field(default="random", init=False)


Location = CornerLocation | FixedLocation | RandomLocation


@dataclass(frozen=True)
class TriggerSpec:
    pattern: Pattern = SolidPattern()
    size: int = 6
    location: Location = CornerLocation()
    alpha: float = 1.0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("trigger size must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        for color in _pattern_colors(self.pattern):
            if any(not 0.0 <= v <= 1.0 for v in color):
                raise ValueError("pattern colors must lie in [0, 1]")
        if isinstance(self.pattern, CheckerPattern) and self.pattern.cell < 1:
            raise ValueError("checker cell must be >= 1")

    @property
    def is_random_location(self) -> bool:
        return isinstance(self.location, RandomLocation)


def _pattern_colors(p: Pattern) -> list[tuple[float, ...]]:
    if isinstance(p, SolidPattern):
        return [p.color]
    if isinstance(p, CheckerPattern):
        return [p.color_a, p.color_b]
    return [p.color]


@dataclass(frozen=True)
class MaterializedTrigger:
    """Mask (H, W) with alpha inside the footprint, pattern (C, H, W), and
    the resolved top-left coordinate of the footprint."""

    mask: np.ndarray
    pattern: np.ndarray
    top_left: tuple[int, int]

    def bounding_box(self) -> BoundingBox:
        box = support_box(self.mask)
        if box is None:
            raise ValueError("trigger mask has empty support")
        return box


def ground_truth_box(trig: MaterializedTrigger) -> BoundingBox:
    """Tight box around the mask support; the reference the evaluation
    scores detections against."""
    return trig.bounding_box()


def _footprint(pattern: Pattern, size: int) -> np.ndarray:
    """Boolean (size, size) support of the trigger inside its square."""
    if isinstance(pattern, (SolidPattern, CheckerPattern)):
        return np.ones((size, size), dtype=bool)
    if pattern.shape == "square":
        return np.ones((size, size), dtype=bool)
    if pattern.shape == "circle":
        c = (size - 1) / 2.0
        r = (size - 1) / 2.0
        yy, xx = np.mgrid[0:size, 0:size]
        return (yy - c) ** 2 + (xx - c) ** 2 <= r * r + 1e-12
    if pattern.shape == "cross":
        stroke = max(1, size // 3)
        lo = (size - stroke) // 2
        hi = lo + stroke
        fp = np.zeros((size, size), dtype=bool)
        fp[lo:hi, :] = True
        fp[:, lo:hi] = True
        return fp
    raise ValueError(f"unknown shape {pattern.shape!r}")


def _paint(pattern: Pattern, size: int, channels: int) -> np.ndarray:
    """Color values (C, size, size) inside the footprint square."""
    def expand(color: Sequence[float]) -> np.ndarray:
        col = np.asarray(color, dtype=np.float64)
        if col.size == 1:
            col = np.full(channels, col[0])
        if col.size != channels:
            raise ValueError(f"color has {col.size} channels, image has {channels}")
        return col

    if isinstance(pattern, CheckerPattern):
        yy, xx = np.mgrid[0:size, 0:size]
        parity = ((yy // pattern.cell) + (xx // pattern.cell)) % 2
        a = expand(pattern.color_a)[:, None, None]
        b = expand(pattern.color_b)[:, None, None]
        return np.where(parity[None] == 0, a, b)
    return np.broadcast_to(expand(pattern.color)[:, None, None], (channels, size, size)).copy()


def materialize(
    spec: TriggerSpec,
    image_dims: tuple[int, int, int],
    rng: np.random.Generator | None = None,
) -> MaterializedTrigger:
    """Resolve a spec against concrete image dimensions (C, H, W).

    Random locations draw uniformly over all placements that keep the
    trigger inside the image; a Generator is then required.
    """
    c, h, w = image_dims
    if spec.size > h or spec.size > w:
        raise ValueError(f"trigger size {spec.size} exceeds image dims {h}x{w}")
    if isinstance(spec.location, CornerLocation):
        top, left = h - spec.size, w - spec.size
    elif isinstance(spec.location, FixedLocation):
        top, left = spec.location.row, spec.location.col
        if top < 0 or left < 0 or top + spec.size > h or left + spec.size > w:
            raise ValueError(f"trigger at ({top}, {left}) size {spec.size} falls outside {h}x{w}")
    else:
        if rng is None:
            raise ValueError("random trigger location needs an rng")
        top = int(rng.integers(0, h - spec.size + 1))
        left = int(rng.integers(0, w - spec.size + 1))

    fp = _footprint(spec.pattern, spec.size)
    mask = np.zeros((h, w), dtype=np.float64)
    mask[top : top + spec.size, left : left + spec.size][fp] = spec.alpha
    pattern = np.zeros((c, h, w), dtype=np.float64)
    paint = _paint(spec.pattern, spec.size, c)
    region = pattern[:, top : top + spec.size, left : left + spec.size]
    region[:, fp] = paint[:, fp]
    return MaterializedTrigger(mask, pattern, (top, left))


def stamp(image: np.ndarray, trig: MaterializedTrigger) -> np.ndarray:
    """Blend the trigger into one (C, H, W) image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape != trig.pattern.shape:
        raise ValueError(f"image shape {image.shape} does not match pattern {trig.pattern.shape}")
    m = trig.mask[None]
    return (1.0 - m) * image + m * trig.pattern


# --------------------------------------------------------------------------
# poisoning
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PoisonEntry:
    trigger: TriggerSpec
    target_label: int


@dataclass(frozen=True)
class PoisonConfig:
    entries: tuple[PoisonEntry, ...]
    fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("poison fraction must lie in (0, 1)")
        if not self.entries:
            raise ValueError("poison config needs at least one entry")
        targets = [e.target_label for e in self.entries]
        if len(set(targets)) != len(targets):
            raise ValueError("target labels must be distinct across entries")


@dataclass
class PoisonedDataset:
    images: np.ndarray
    labels: np.ndarray
    # per entry: indices (into the *output* arrays) of its poisoned samples
    poisoned_indices: list[np.ndarray]


def poison_dataset(images: np.ndarray, labels: np.ndarray, cfg: PoisonConfig) -> PoisonedDataset:
    """Stamp and relabel disjoint random subsets, one per entry.

    Each entry claims floor(fraction * N) samples; non-poisoned samples are
    bitwise untouched, then the whole set is shuffled with the seed. Random
    trigger locations are resolved per poisoned sample.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(images)
    per_entry = int(cfg.fraction * n)
    if per_entry < 1:
        raise ValueError(f"fraction {cfg.fraction} of {n} samples poisons nothing")
    if per_entry * len(cfg.entries) > n:
        raise ValueError(
            f"capacity exceeded: {len(cfg.entries)} entries x {per_entry} samples "
            f"> {n} available"
        )
    for e in cfg.entries:
        if not 0 <= e.target_label:
            raise ValueError(f"bad target label {e.target_label}")

    rng = np.random.default_rng(cfg.seed)
    out_images = images.copy()
    out_labels = labels.copy()
    pick = rng.permutation(n)
    dims = images.shape[1:]
    chosen: list[np.ndarray] = []
    for k, entry in enumerate(cfg.entries):
        idx = pick[k * per_entry : (k + 1) * per_entry]
        if entry.trigger.is_random_location:
            for i in idx:
                trig = materialize(entry.trigger, dims, rng)
                out_images[i] = stamp(out_images[i], trig)
        else:
            trig = materialize(entry.trigger, dims, rng)
            for i in idx:
                out_images[i] = stamp(out_images[i], trig)
        out_labels[idx] = entry.target_label
        chosen.append(idx)

    order = rng.permutation(n)
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = np.arange(n)
    return PoisonedDataset(
        images=out_images[order],
        labels=out_labels[order],
        poisoned_indices=[np.sort(inverse[idx]) for idx in chosen],
    )


# --------------------------------------------------------------------------
# backdoor training and model-level metrics
# --------------------------------------------------------------------------

@dataclass
class TrojanBundle:
    clean: Network
    trojaned: Network
    poison: PoisonConfig
    clean_history: list
    trojan_history: list


def trojan_train(
    init_net: Network,
    images: np.ndarray,
    labels: np.ndarray,
    poison_cfg: PoisonConfig,
    train_cfg: TrainConfig,
) -> TrojanBundle:
    """Train the clean and the backdoored model from the same initialization.

    ``init_net`` holds the (untrained) starting parameters; both trainings
    copy it, so the two models stay architecture- and init-comparable.
    """
    clean, clean_hist = train(init_net, images, labels, train_cfg)
    poisoned = poison_dataset(images, labels, poison_cfg)
    trojaned, trojan_hist = train(init_net, poisoned.images, poisoned.labels, train_cfg)
    return TrojanBundle(clean, trojaned, poison_cfg, clean_hist, trojan_hist)


def misclassification_rate(net: Network, stamped_images: np.ndarray, target_label: int) -> float:
    """Fraction of stamped images classified to the target label."""
    if len(stamped_images) == 0:
        raise ValueError("stamped set is empty")
    preds = predict_batch(net, stamped_images)
    return float(np.mean(preds == target_label))


def classification_accuracy(net: Network, images: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of trigger-free images classified to their true label."""
    if len(images) == 0:
        raise ValueError("clean set is empty")
    if len(images) != len(labels):
        raise ValueError("images and labels disagree in length")
    preds = predict_batch(net, images)
    return float(np.mean(preds == np.asarray(labels)))


def stamp_all(
    images: np.ndarray,
    spec: TriggerSpec,
    image_dims: tuple[int, int, int],
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[MaterializedTrigger]]:
    """Stamp every image; random locations re-resolve per image."""
    out = np.empty_like(np.asarray(images, dtype=np.float64))
    trigs: list[MaterializedTrigger] = []
    fixed = None if spec.is_random_location else materialize(spec, image_dims, rng)
    for i, img in enumerate(images):
        trig = fixed if fixed is not None else materialize(spec, image_dims, rng)
        out[i] = stamp(img, trig)
        trigs.append(trig)
    return out, trigs
