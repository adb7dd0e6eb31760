"""Edge-based trigger localization.

A saliency map is reduced to a single detected bounding box by a four-stage
edge detector (Gaussian smoothing, Sobel gradients, non-maximum suppression,
hysteresis tracking) followed by the minimal axis-aligned rectangle covering
every edge pixel. All stages are pure and deterministic.

Implementation notes that matter for localization quality on small maps:

* Borders are padded by replication. Reflect-style padding mirrors interior
  brightness across the border and erases the gradient of regions that sit
  1-2 px away from it, which mislocalizes corner triggers.
* The gradient direction is quantized to eight 45-degree sectors, keeping
  its sign. Suppression keeps a pixel only when it is strictly greater than
  its uphill neighbor (tolerance-adjusted) and no smaller than its downhill
  neighbor. A symmetric rule would resolve the exact two-pixel tie that a
  smoothed step produces by floating-point noise, smearing every detected
  rectangle outward by one pixel per side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative slack for the uphill/downhill comparisons; breaks smoothed-step
# ties deterministically toward the brighter side
NMS_REL_TOL = 1e-9


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel rectangle."""

    row_min: int
    col_min: int
    row_max: int
    col_max: int

    def __post_init__(self):
        if self.row_min > self.row_max or self.col_min > self.col_max:
            raise ValueError(f"degenerate box {self}")
        if min(self.row_min, self.col_min) < 0:
            raise ValueError(f"box has negative coordinates {self}")

    @property
    def area(self) -> int:
        return (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)

    def contains(self, row: int, col: int) -> bool:
        return self.row_min <= row <= self.row_max and self.col_min <= col <= self.col_max

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.row_min, self.col_min, self.row_max, self.col_max)


@dataclass(frozen=True)
class CannyConfig:
    sigma: float = 1.4
    kernel_size: int = 5
    low: float = 0.10
    high: float = 0.30

    def __post_init__(self):
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd and >= 3")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.low < self.high <= 1:
            raise ValueError("thresholds must satisfy 0 < low < high <= 1")


def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    """Normalized 2-D Gaussian; weights sum to one."""
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _correlate(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = kernel.shape[0] // 2
    h, w = values.shape
    if r > min(h, w):
        raise ValueError(f"kernel {kernel.shape[0]}x{kernel.shape[0]} does not fit a {h}x{w} map")
    padded = np.pad(values, r, mode="edge")
    out = np.zeros_like(values)
    for u in range(kernel.shape[0]):
        for v in range(kernel.shape[1]):
            out += kernel[u, v] * padded[u : u + h, v : v + w]
    return out


def gaussian_smooth(values: np.ndarray, cfg: CannyConfig = CannyConfig()) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected a 2-D map")
    return _correlate(values, gaussian_kernel(cfg.sigma, cfg.kernel_size))


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T

# sector code (degrees / 45) -> (drow, dcol) of the uphill neighbor
_SECTOR_OFFSETS = (
    (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1),
)


def gradient_field(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sobel gradient magnitude and direction.

    The direction map holds the gradient angle in degrees quantized to the
    eight 45-degree sectors {0, 45, ..., 315}; 0 means the intensity grows
    toward increasing column index.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or min(values.shape) < 3:
        raise ValueError("gradient field needs a 2-D map of at least 3x3")
    gx = _correlate(values, _SOBEL_X)
    gy = _correlate(values, _SOBEL_Y)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 360.0
    direction = (np.round(angle / 45.0).astype(np.int64) % 8) * 45
    return magnitude, direction


def nonmax_suppress(magnitude: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Thin the magnitude field to single-pixel ridges.

    A pixel survives when it is strictly greater than its uphill neighbor
    (beyond a relative tolerance) and at least as large as its downhill
    neighbor; out-of-bounds neighbors count as zero.
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    h, w = magnitude.shape
    tol = NMS_REL_TOL * float(magnitude.max()) if magnitude.size else 0.0
    up = np.zeros_like(magnitude)
    down = np.zeros_like(magnitude)
    for code, (dr, dc) in enumerate(_SECTOR_OFFSETS):
        mask = direction == code * 45
        if not mask.any():
            continue
        shifted_up = _shift(magnitude, -dr, -dc)
        shifted_down = _shift(magnitude, dr, dc)
        up[mask] = shifted_up[mask]
        down[mask] = shifted_down[mask]
    keep = (magnitude > up + tol) & (magnitude >= down - tol)
    out = np.zeros_like(magnitude)
    out[keep] = magnitude[keep]
    return out


def _shift(a: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with zero fill: out[i, j] = a[i - dr, j - dc]."""
    h, w = a.shape
    out = np.zeros_like(a)
    src_r = slice(max(0, -dr), min(h, h - dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_r = slice(max(0, dr), min(h, h + dr))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = a[src_r, src_c]
    return out


def hysteresis(suppressed: np.ndarray, cfg: CannyConfig = CannyConfig()) -> np.ndarray:
    """Track edges: pixels above high*max seed a flood over 8-connected
    pixels above low*max. Thresholds are relative to the map maximum, which
    makes the whole detector invariant to uniform intensity scaling."""
    suppressed = np.asarray(suppressed, dtype=np.float64)
    peak = float(suppressed.max()) if suppressed.size else 0.0
    edges = np.zeros(suppressed.shape, dtype=bool)
    if peak <= 0.0:
        return edges
    strong = suppressed >= cfg.high * peak
    weak = suppressed >= cfg.low * peak
    edges |= strong
    stack = [(int(i), int(j)) for i, j in zip(*np.nonzero(strong))]
    h, w = suppressed.shape
    while stack:
        i, j = stack.pop()
        for a in (i - 1, i, i + 1):
            if a < 0 or a >= h:
                continue
            for b in (j - 1, j, j + 1):
                if b < 0 or b >= w:
                    continue
                if weak[a, b] and not edges[a, b]:
                    edges[a, b] = True
                    stack.append((a, b))
    return edges


def canny(values: np.ndarray, cfg: CannyConfig = CannyConfig()) -> np.ndarray:
    """Full edge detection pipeline over a nonnegative 2-D map."""
    smoothed = gaussian_smooth(values, cfg)
    magnitude, direction = gradient_field(smoothed)
    # constant maps leave float residue ~1e-16 in the Sobel sums; relative
    # thresholds would amplify that noise into edges, so floor it here
    if float(magnitude.max()) <= 1e-12 * float(np.abs(smoothed).max() + 1e-300):
        return np.zeros(magnitude.shape, dtype=bool)
    return hysteresis(nonmax_suppress(magnitude, direction), cfg)


def min_bounding_box(edges: np.ndarray) -> BoundingBox | None:
    """Smallest box covering all edge pixels, or None if there are none.

    Callers treat None as a localization failure and score it as IOU 0.
    """
    rows = np.nonzero(edges.any(axis=1))[0]
    cols = np.nonzero(edges.any(axis=0))[0]
    if len(rows) == 0:
        return None
    return BoundingBox(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


def detect_box(values: np.ndarray, cfg: CannyConfig = CannyConfig()) -> BoundingBox | None:
    """Convenience composition: canny + minimal covering rectangle."""
    return min_bounding_box(canny(values, cfg))


def support_box(mask: np.ndarray) -> BoundingBox | None:
    """Tight box around the nonzero support of a mask (H, W)."""
    return min_bounding_box(np.asarray(mask) > 0)
