"""Explanation-quality metrics.

Box overlap (IOU) scores localization; pixel recovery tests causality: copy
the original pixels back inside the detected box, re-classify, and check
whether the backdoor misclassification is subverted (recovering rate) and
how many stamped pixels the box failed to cover (recovering difference, a
normalized L0 count). Computation cost is the mean wall-clock seconds per
saliency map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .localize import BoundingBox


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two inclusive pixel rectangles."""
    ri = max(a.row_min, b.row_min)
    ci = max(a.col_min, b.col_min)
    rj = min(a.row_max, b.row_max)
    cj = min(a.col_max, b.col_max)
    inter = max(0, rj - ri + 1) * max(0, cj - ci + 1)
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class RecoveredImage:
    values: np.ndarray
    box: BoundingBox


def recover(trojaned: np.ndarray, original: np.ndarray, box: BoundingBox) -> RecoveredImage:
    """Copy original pixels back inside the box; everything else is the
    stamped image, bitwise."""
    trojaned = np.asarray(trojaned, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    if trojaned.shape != original.shape:
        raise ValueError(f"shape mismatch: {trojaned.shape} vs {original.shape}")
    h, w = trojaned.shape[-2:]
    if box.row_max >= h or box.col_max >= w:
        raise ValueError(f"box {box.as_tuple()} exceeds image dims {h}x{w}")
    out = trojaned.copy()
    out[..., box.row_min : box.row_max + 1, box.col_min : box.col_max + 1] = \
        original[..., box.row_min : box.row_max + 1, box.col_min : box.col_max + 1]
    return RecoveredImage(out, box)


def recovering_rate(trojaned_net, cases: list[tuple[np.ndarray, int]]) -> float:
    """Fraction of recovered images the backdoored model classifies to the
    true label."""
    from .nn import predict_batch

    if not cases:
        raise ValueError("no recovery cases given")
    batch = np.stack([np.asarray(x, dtype=np.float64) for x, _ in cases])
    labels = np.array([y for _, y in cases])
    preds = predict_batch(trojaned_net, batch)
    return float(np.mean(preds == labels))


def l0_difference(original: np.ndarray, recovered: np.ndarray, eps: float = 1e-9) -> float:
    """count(|x - x_hat| > eps) / count(|x| > eps) for one image pair."""
    original = np.asarray(original, dtype=np.float64)
    recovered = np.asarray(recovered, dtype=np.float64)
    if original.shape != recovered.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {recovered.shape}")
    denom = int(np.count_nonzero(np.abs(original) > eps))
    if denom == 0:
        raise ValueError("degenerate image: no element exceeds eps, L0 ratio undefined")
    num = int(np.count_nonzero(np.abs(original - recovered) > eps))
    return num / denom


def recovering_difference(pairs: list[tuple[np.ndarray, np.ndarray]], eps: float = 1e-9) -> float:
    """Mean normalized L0 difference over (original, recovered) pairs."""
    if not pairs:
        raise ValueError("no image pairs given")
    return float(np.mean([l0_difference(x, xh, eps) for x, xh in pairs]))


def computation_cost(timings: list[float]) -> float:
    """Mean seconds per saliency map."""
    if not timings:
        raise ValueError("no timings given")
    if any(t < 0 for t in timings):
        raise ValueError("timings must be nonnegative")
    return float(np.mean(timings))


@dataclass(frozen=True)
class ImageResult:
    """Per-image evaluation tuple for one (scenario, method) pair."""

    true_box: BoundingBox
    detected_box: BoundingBox | None
    iou: float
    true_label: int
    recovered_label: int
    l0_difference: float
    wall_clock_seconds: float


@dataclass
class EvalRecord:
    """One report row: per-image tuples plus their aggregates and the
    model-level backdoor stats."""

    model_id: str
    scenario_id: str
    method: str
    images: list[ImageResult]
    mr: float
    ca: float
    iou_mean: float = field(init=False)
    rr: float = field(init=False)
    rd: float = field(init=False)
    cc_mean: float = field(init=False)

    def __post_init__(self):
        if not self.images:
            raise ValueError("a record needs at least one evaluated image")
        self.iou_mean = float(np.mean([r.iou for r in self.images]))
        self.rr = float(np.mean([r.recovered_label == r.true_label for r in self.images]))
        self.rd = float(np.mean([r.l0_difference for r in self.images]))
        self.cc_mean = float(np.mean([r.wall_clock_seconds for r in self.images]))
        for name in ("iou_mean", "rr", "mr", "ca"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.rd < 0:
            raise ValueError(f"rd={self.rd} negative")
