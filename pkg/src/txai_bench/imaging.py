"""Netpbm export: saliency maps as 8-bit PGM, overlays and triggers as PPM."""

from __future__ import annotations

import numpy as np

from .localize import BoundingBox

GROUND_TRUTH_COLOR = (0, 255, 0)
DETECTED_COLOR = (0, 128, 255)


def to_byte(values: np.ndarray) -> np.ndarray:
    """round(255 * v) clipped to [0, 255]."""
    return np.clip(np.round(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> None:
    """P5 binary, maxval 255; input is an (H, W) map of scores in [0, 1]."""
    arr = to_byte(values)
    if arr.ndim != 2:
        raise ValueError(f"PGM wants a 2-D map, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    """P6 binary, maxval 255; input is (H, W, 3) uint8."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"PPM wants (H, W, 3), got shape {rgb.shape}")
    with open(path, "wb") as f:
        f.write(f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def read_netpbm(path) -> np.ndarray:
    """Read back a binary P5/P6 file (8-bit); mainly for tests."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        dims = f.readline().split()
        maxval = int(f.readline())
        if maxval != 255:
            raise ValueError("only 8-bit netpbm supported")
        w, h = int(dims[0]), int(dims[1])
        channels = 3 if magic == b"P6" else 1
        data = np.frombuffer(f.read(h * w * channels), dtype=np.uint8)
    if magic == b"P6":
        return data.reshape(h, w, 3)
    if magic == b"P5":
        return data.reshape(h, w)
    raise ValueError(f"unsupported netpbm magic {magic!r}")


def image_to_rgb(image: np.ndarray) -> np.ndarray:
    """(C, H, W) float image in [0, 1] -> (H, W, 3) uint8."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ValueError("expected a (C, H, W) image")
    if image.shape[0] == 1:
        rgb = np.repeat(image[0][:, :, None], 3, axis=2)
    elif image.shape[0] == 3:
        rgb = image.transpose(1, 2, 0)
    else:
        raise ValueError(f"cannot render {image.shape[0]}-channel image")
    return to_byte(rgb)


def draw_box(rgb: np.ndarray, box: BoundingBox, color: tuple[int, int, int]) -> None:
    """Draw the 1-px rectangle outline in place."""
    r0, c0, r1, c1 = box.as_tuple()
    col = np.array(color, dtype=np.uint8)
    rgb[r0, c0 : c1 + 1] = col
    rgb[r1, c0 : c1 + 1] = col
    rgb[r0 : r1 + 1, c0] = col
    rgb[r0 : r1 + 1, c1] = col


def render_overlay(
    image: np.ndarray,
    saliency: np.ndarray,
    true_box: BoundingBox | None = None,
    detected_box: BoundingBox | None = None,
) -> np.ndarray:
    """Input image with a red heat wash plus box outlines (ground truth in
    green, detection in blue)."""
    rgb = image_to_rgb(image).astype(np.float64) / 255.0
    heat = np.asarray(saliency, dtype=np.float64)
    if heat.shape != rgb.shape[:2]:
        raise ValueError(f"saliency shape {heat.shape} does not match image {rgb.shape[:2]}")
    wash = 0.6 * heat[:, :, None]
    red = np.zeros_like(rgb)
    red[:, :, 0] = 1.0
    out = to_byte(rgb * (1.0 - wash) + red * wash)
    if true_box is not None:
        draw_box(out, true_box, GROUND_TRUTH_COLOR)
    if detected_box is not None:
        draw_box(out, detected_box, DETECTED_COLOR)
    return out
