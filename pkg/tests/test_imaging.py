import numpy as np
import pytest

from txai_bench.imaging import (
    DETECTED_COLOR,
    GROUND_TRUTH_COLOR,
    image_to_rgb,
    read_netpbm,
    render_overlay,
    write_pgm,
    write_ppm,
)
from txai_bench.localize import BoundingBox


def test_pgm_bytes(tmp_path):
    values = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = tmp_path / "m.pgm"
    write_pgm(path, values)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n2 2\n255\n")
    assert blob[-4:] == bytes([0, 128, 255, 64])


def test_pgm_round_trip(tmp_path, rng):
    values = rng.random((9, 7))
    write_pgm(tmp_path / "m.pgm", values)
    back = read_netpbm(tmp_path / "m.pgm")
    np.testing.assert_array_equal(back, np.round(values * 255).astype(np.uint8))


def test_ppm_round_trip(tmp_path, rng):
    rgb = (rng.random((5, 6, 3)) * 255).astype(np.uint8)
    write_ppm(tmp_path / "m.ppm", rgb)
    back = read_netpbm(tmp_path / "m.ppm")
    np.testing.assert_array_equal(back, rgb)
    assert (tmp_path / "m.ppm").read_bytes().startswith(b"P6\n6 5\n255\n")


def test_image_to_rgb_grayscale_and_color(rng):
    gray = rng.random((1, 4, 4))
    rgb = image_to_rgb(gray)
    assert rgb.shape == (4, 4, 3)
    assert (rgb[:, :, 0] == rgb[:, :, 1]).all()
    color = rng.random((3, 4, 4))
    assert image_to_rgb(color).shape == (4, 4, 3)
    with pytest.raises(ValueError):
        image_to_rgb(rng.random((2, 4, 4)))


def test_overlay_draws_boxes(rng):
    image = rng.random((1, 12, 12)) * 0.3
    saliency = np.zeros((12, 12))
    overlay = render_overlay(
        image, saliency,
        true_box=BoundingBox(2, 2, 5, 5),
        detected_box=BoundingBox(7, 7, 10, 10),
    )
    assert tuple(overlay[2, 3]) == GROUND_TRUTH_COLOR
    assert tuple(overlay[5, 2]) == GROUND_TRUTH_COLOR
    assert tuple(overlay[7, 8]) == DETECTED_COLOR
    assert tuple(overlay[10, 10]) == DETECTED_COLOR


def test_overlay_heat_increases_red(rng):
    image = np.full((1, 8, 8), 0.2)
    saliency = np.zeros((8, 8))
    saliency[3, 3] = 1.0
    overlay = render_overlay(image, saliency)
    assert overlay[3, 3, 0] > overlay[0, 0, 0]
    assert overlay[3, 3, 2] < overlay[0, 0, 2]
