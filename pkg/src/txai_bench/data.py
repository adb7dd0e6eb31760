"""Dataset ingestion: IDX files and the synthetic shape generator.

The synthetic generator is the desk-scale stand-in dataset: each class is a
distinct geometric pattern rendered with per-sample pose jitter plus optional
Gaussian pixel noise. It is calibrated so a small two-conv network reaches
high clean accuracy under the default training config.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed IDX content; the message names the failing byte offset."""


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, C, H, W) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, C, H, W), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_dims(self) -> tuple[int, int, int]:
        return self.images.shape[1:]

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.images[indices], self.labels[indices])


def _read_u32s(data: bytes, offset: int, count: int, what: str) -> tuple[int, ...]:
    end = offset + 4 * count
    if end > len(data):
        raise IdxFormatError(f"truncated while reading {what} at byte {offset}")
    return struct.unpack(f">{count}I", data[offset:end])


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Parse the big-endian IDX pair (u8 images [N,H,W], u8 labels [N]).

    Pixel values are scaled to [0, 1]; images gain a singleton channel axis.
    """
    with open(images_path, "rb") as f:
        raw = f.read()
    (magic,) = _read_u32s(raw, 0, 1, "image magic")
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(
            f"unsupported IDX element type 0x{magic:08x} at byte 0 (expected 0x{IDX_IMAGE_MAGIC:08x})"
        )
    n, h, w = _read_u32s(raw, 4, 3, "image dimensions")
    expected = 16 + n * h * w
    if len(raw) < expected:
        raise IdxFormatError(f"image data truncated at byte {len(raw)} (need {expected})")
    if len(raw) > expected:
        raise IdxFormatError(f"trailing bytes after image data at byte {expected}")
    images = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, 1, h, w)

    with open(labels_path, "rb") as f:
        raw_l = f.read()
    (magic_l,) = _read_u32s(raw_l, 0, 1, "label magic")
    if magic_l != IDX_LABEL_MAGIC:
        raise IdxFormatError(
            f"unsupported IDX element type 0x{magic_l:08x} at byte 0 (expected 0x{IDX_LABEL_MAGIC:08x})"
        )
    (n_labels,) = _read_u32s(raw_l, 4, 1, "label count")
    if len(raw_l) < 8 + n_labels:
        raise IdxFormatError(f"label data truncated at byte {len(raw_l)} (need {8 + n_labels})")
    if len(raw_l) > 8 + n_labels:
        raise IdxFormatError(f"trailing bytes after label data at byte {8 + n_labels}")
    if n_labels != n:
        raise IdxFormatError(f"count mismatch: {n} images but {n_labels} labels")
    labels = np.frombuffer(raw_l, dtype=np.uint8, offset=8)
    return LabeledDataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Inverse of load_idx for (N, 1, H, W) float images in [0, 1]."""
    arr = np.asarray(images)
    n, _, h, w = arr.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGE_MAGIC, n, h, w))
        f.write(np.round(arr[:, 0] * 255.0).astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABEL_MAGIC, n))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


# --------------------------------------------------------------------------
# synthetic shapes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 3
    image_size: int = 28
    train_count: int = 3000
    test_count: int = 600
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least two classes")
        if self.image_size < 16:
            raise ValueError("image size must be >= 16 so triggers fit")
        if self.classes > len(_SHAPE_KINDS):
            raise ValueError(f"at most {len(_SHAPE_KINDS)} classes supported")
        if self.train_count < 1 or self.test_count < 1:
            raise ValueError("sample counts must be positive")
        if self.noise < 0:
            raise ValueError("noise level must be >= 0")


_SHAPE_KINDS = ("disk", "frame", "stripes", "bars", "wedge")

_BACKGROUND = 0.1
_FOREGROUND = 0.6


def render_shape(kind: str, size: int, center: tuple[float, float], scale: float) -> np.ndarray:
    """Deterministic renderer for one class pattern at a given pose."""
    img = np.full((size, size), _BACKGROUND)
    cy, cx = center
    r = scale * size / 4.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == "disk":
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = _FOREGROUND
    elif kind == "frame":
        inside = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
        inner = (np.abs(yy - cy) <= r - 2) & (np.abs(xx - cx) <= r - 2)
        img[inside & ~inner] = _FOREGROUND
    elif kind == "stripes":
        band = ((yy + xx - (cy + cx)) / 3.0).astype(np.int64) % 2 == 0
        sel = band & ((yy - cy) ** 2 + (xx - cx) ** 2 <= (1.4 * r) ** 2)
        img[sel] = _FOREGROUND
    elif kind == "bars":
        sel = (np.abs(xx - cx) <= r / 3) | (np.abs(xx - cx - 2.5 * r / 3) <= r / 3)
        img[sel & (np.abs(yy - cy) <= 1.2 * r)] = _FOREGROUND
    elif kind == "wedge":
        sel = (yy - cy >= -r) & (yy - cy <= r) & (np.abs(xx - cx) <= (yy - cy + r) / 2.0)
        img[sel] = _FOREGROUND
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    return img


def _render_split(spec: SyntheticSpec, count: int, rng: np.random.Generator) -> LabeledDataset:
    size = spec.image_size
    images = np.empty((count, 1, size, size))
    labels = rng.integers(0, spec.classes, size=count)
    jitter = size / 8.0
    for i, label in enumerate(labels):
        cy = size / 2.0 + rng.uniform(-jitter, jitter)
        cx = size / 2.0 + rng.uniform(-jitter, jitter)
        scale = rng.uniform(0.85, 1.15)
        img = render_shape(_SHAPE_KINDS[label], size, (cy, cx), scale)
        if spec.noise > 0:
            img = img + spec.noise * rng.standard_normal(img.shape)
        images[i, 0] = np.clip(img, 0.0, 1.0)
    return LabeledDataset(images, labels)


def generate_synthetic(spec: SyntheticSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic (train, test) pair for the given spec and seed."""
    rng = np.random.default_rng(spec.seed)
    train = _render_split(spec, spec.train_count, rng)
    test = _render_split(spec, spec.test_count, rng)
    return train, test
