import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txai_bench.localize import (
    BoundingBox,
    CannyConfig,
    canny,
    detect_box,
    gaussian_kernel,
    gaussian_smooth,
    gradient_field,
    hysteresis,
    min_bounding_box,
    nonmax_suppress,
    support_box,
)
from txai_bench.metrics import iou
from tests_oracles import flood_oracle, nms_oracle


# --------------------------------------------------------------------------
# smoothing
# --------------------------------------------------------------------------

def test_kernel_normalized():
    k = gaussian_kernel(1.4, 5)
    assert abs(k.sum() - 1.0) < 1e-12


def test_smooth_constant_unchanged():
    out = gaussian_smooth(np.full((9, 9), 0.37))
    np.testing.assert_allclose(out, 0.37, atol=1e-12)


def test_smooth_impulse_reproduces_kernel():
    m = np.zeros((11, 11))
    m[5, 5] = 1.0
    out = gaussian_smooth(m)
    np.testing.assert_allclose(out[3:8, 3:8], gaussian_kernel(1.4, 5), atol=1e-12)


def test_smooth_matches_naive_convolution(rng):
    m = rng.random((10, 12))
    cfg = CannyConfig()
    out = gaussian_smooth(m, cfg)
    k = gaussian_kernel(cfg.sigma, cfg.kernel_size)
    r = cfg.kernel_size // 2
    padded = np.pad(m, r, mode="edge")
    naive = np.zeros_like(m)
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            acc = 0.0
            for u in range(cfg.kernel_size):
                for v in range(cfg.kernel_size):
                    acc += k[u, v] * padded[i + u, j + v]
            naive[i, j] = acc
    np.testing.assert_allclose(out, naive, atol=1e-12)


def test_even_kernel_rejected():
    with pytest.raises(ValueError):
        CannyConfig(kernel_size=4)


# --------------------------------------------------------------------------
# gradients
# --------------------------------------------------------------------------

def test_gradient_constant_zero():
    mag, _ = gradient_field(np.full((8, 8), 2.0))
    np.testing.assert_allclose(mag, 0.0, atol=1e-12)


def test_gradient_vertical_step_direction():
    m = np.zeros((9, 9))
    m[:, 5:] = 1.0  # brightness grows to the right
    mag, direction = gradient_field(m)
    band = mag[3:6, 4:6]
    assert band.min() > 0
    assert (direction[3:6, 4:6] == 0).all()


def test_gradient_ramp_matches_hand_stencil():
    m = np.tile(np.arange(8.0), (8, 1))  # r(i, j) = j
    mag, _ = gradient_field(m)
    # interior Sobel response on a unit ramp: |gx| = 8, |gy| = 0
    np.testing.assert_allclose(mag[2:6, 2:6], 8.0, atol=1e-12)


# --------------------------------------------------------------------------
# suppression
# --------------------------------------------------------------------------

def test_nms_isolated_peak_kept():
    mag = np.zeros((5, 5))
    mag[2, 2] = 1.0
    direction = np.zeros((5, 5), dtype=np.int64)
    out = nonmax_suppress(mag, direction)
    assert out[2, 2] == 1.0 and out.sum() == 1.0


def test_nms_monotone_ramp_keeps_largest():
    mag = np.zeros((3, 5))
    mag[1, 1:4] = [1.0, 2.0, 3.0]
    direction = np.zeros((3, 5), dtype=np.int64)  # gradient points +col
    out = nonmax_suppress(mag, direction)
    assert out[1, 3] == 3.0
    assert out[1, 1] == 0.0 and out[1, 2] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nms_matches_bruteforce_oracle(seed):
    rng = np.random.default_rng(seed)
    mag, direction = gradient_field(gaussian_smooth(rng.random((16, 16))))
    np.testing.assert_array_equal(nonmax_suppress(mag, direction), nms_oracle(mag, direction))


# --------------------------------------------------------------------------
# hysteresis
# --------------------------------------------------------------------------

def test_hysteresis_no_seeds_empty():
    sup = np.full((6, 6), 0.2)
    cfg = CannyConfig(low=0.5, high=0.9)
    # all equal: everything is >= high * max, so actually all strong; use a
    # field whose peak dominates instead
    sup[0, 0] = 10.0
    out = hysteresis(sup, cfg)
    assert out[0, 0] and out.sum() == 1


def test_hysteresis_all_strong():
    sup = np.full((4, 4), 3.0)
    assert hysteresis(sup, CannyConfig()).all()


def test_hysteresis_chain_connectivity():
    cfg = CannyConfig(low=0.2, high=0.8)
    sup = np.zeros((5, 5))
    sup[0, 0] = 0.3   # weak, chained to strong via (1, 1)
    sup[1, 1] = 0.25  # weak
    sup[2, 2] = 1.0   # strong
    sup[4, 0] = 0.3   # weak, isolated
    out = hysteresis(sup, cfg)
    assert out[0, 0] and out[1, 1] and out[2, 2]
    assert not out[4, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hysteresis_matches_flood_oracle(seed):
    rng = np.random.default_rng(seed)
    sup = rng.random((16, 16)) * (rng.random((16, 16)) > 0.6)
    cfg = CannyConfig(low=0.2, high=0.5)
    np.testing.assert_array_equal(hysteresis(sup, cfg), flood_oracle(sup, cfg))


# --------------------------------------------------------------------------
# full pipeline
# --------------------------------------------------------------------------

def test_canny_constant_empty():
    assert canny(np.full((12, 12), 0.4)).sum() == 0


def test_canny_square_ring_within_one_pixel():
    m = np.zeros((28, 28))
    m[11:17, 11:17] = 1.0
    edges = canny(m)
    ys, xs = np.nonzero(edges)
    assert len(ys) > 0
    assert ys.min() >= 10 and ys.max() <= 17 and xs.min() >= 10 and xs.max() <= 17
    # every edge pixel hugs the square border
    for i, j in zip(ys, xs):
        on_row = i in (10, 11, 16, 17) and 10 <= j <= 17
        on_col = j in (10, 11, 16, 17) and 10 <= i <= 17
        assert on_row or on_col


@pytest.mark.parametrize("k", [2.0, 0.5, 4.0, 3.7])
def test_canny_scale_invariance(k):
    rng = np.random.default_rng(17)
    m = np.zeros((20, 20))
    m[4:12, 6:15] = 1.0
    m += 0.05 * rng.random((20, 20))
    np.testing.assert_array_equal(canny(m), canny(k * m))


def test_min_bounding_box_cases():
    edges = np.zeros((10, 10), bool)
    assert min_bounding_box(edges) is None
    edges[2, 3] = edges[5, 7] = True
    assert min_bounding_box(edges).as_tuple() == (2, 3, 5, 7)
    single = np.zeros((4, 4), bool)
    single[1, 2] = True
    box = min_bounding_box(single)
    assert box.as_tuple() == (1, 2, 1, 2) and box.area == 1


def test_bounding_box_validation():
    with pytest.raises(ValueError):
        BoundingBox(3, 0, 2, 5)
    with pytest.raises(ValueError):
        BoundingBox(-1, 0, 2, 5)


def test_edges_only_where_suppressed_positive(rng):
    m = rng.random((20, 20))
    smoothed = gaussian_smooth(m)
    mag, direction = gradient_field(smoothed)
    sup = nonmax_suppress(mag, direction)
    edges = canny(m)
    assert not edges[sup == 0].any()
    box = min_bounding_box(edges)
    if box is not None:
        ys, xs = np.nonzero(edges)
        assert all(box.contains(i, j) for i, j in zip(ys, xs))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_localization_sanity_rectangles(seed):
    rng = np.random.default_rng(seed)
    h = int(rng.integers(4, 13))
    w = int(rng.integers(4, 13))
    r0 = int(rng.integers(0, 28 - h + 1))
    c0 = int(rng.integers(0, 28 - w + 1))
    m = np.zeros((28, 28))
    m[r0:r0 + h, c0:c0 + w] = 1.0
    detected = detect_box(m)
    truth = BoundingBox(r0, c0, r0 + h - 1, c0 + w - 1)
    assert detected is not None
    assert iou(detected, truth) >= 0.8


def test_support_box():
    m = np.zeros((8, 8))
    assert support_box(m) is None
    m[2:5, 3:4] = 0.7
    assert support_box(m).as_tuple() == (2, 3, 4, 3)
