import xml.etree.ElementTree as ET

import numpy as np
import pytest

from regionlab.models.errors import UnsupportedStyleError
from regionlab.models.network import DenseLayer, NetworkModel, forward
from regionlab.models.slices import (
    SlicePlane,
    SliceRaster,
    boundary_from_hashes,
    rasterize,
    render,
    unique_region_count,
)
from tests.helpers import affine_model, random_network


def square_raster(hashes, classes=None, outside=None):
    hashes = np.asarray(hashes, dtype=np.uint64)
    classes = np.zeros(hashes.shape, dtype=np.int64) if classes is None else np.asarray(classes)
    outside = np.zeros(hashes.shape, dtype=bool) if outside is None else np.asarray(outside)
    return SliceRaster(hashes, np.zeros(hashes.shape), classes, boundary_from_hashes(hashes), outside)


def test_region_ppm_golden():
    raster = square_raster([[1, 2], [3, 4]], outside=[[False, False], [False, True]])
    data = render(raster, "region", "ppm")
    gray, white = bytes([128, 128, 128]), bytes([255, 255, 255])
    assert data == b"P6\n2 2\n255\n" + gray * 3 + white


def test_class_ppm_golden():
    raster = square_raster([[1, 1], [1, 1]], classes=[[0, 1], [2, 3]])
    data = render(raster, "class", "ppm")
    header = b"P6\n2 2\n255\n"
    assert data.startswith(header)
    pixels = np.frombuffer(data[len(header) :], dtype=np.uint8).reshape(4, 3)
    assert pixels.tolist() == [[9, 181, 66], [0, 143, 213], [252, 79, 48], [229, 174, 56]]


def test_svg_is_valid_and_deterministic():
    raster = square_raster([[1, 2], [1, 2]])
    first = render(raster, "region", "svg")
    assert ET.fromstring(first).tag.endswith("svg")
    assert render(raster, "region", "svg") == first


def test_unsupported_style_and_format():
    raster = square_raster([[1]])
    with pytest.raises(UnsupportedStyleError):
        render(raster, "heat", "ppm")
    with pytest.raises(UnsupportedStyleError):
        render(raster, "region", "png")


def test_boundary_matches_neighbor_loop():
    hashes = np.random.default_rng(0).integers(0, 3, size=(7, 9)).astype(np.uint64)
    mask = boundary_from_hashes(hashes)
    for i in range(7):
        for j in range(9):
            neighbors = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            expected = any(0 <= a < 7 and 0 <= b < 9 and hashes[a, b] != hashes[i, j] for a, b in neighbors)
            assert mask[i, j] == expected


def test_linear_model_is_one_region():
    model = affine_model([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0])
    raster = rasterize(model, SlicePlane.axes(resolution=(20, 10)))
    assert raster.shape == (10, 20)
    assert unique_region_count(raster) == 1
    assert not raster.boundary_mask.any()
    assert np.all(raster.predicted_class[:, :10] == 1)
    assert np.all(raster.predicted_class[:, 10:] == 0)


def test_all_active_network_has_full_rate():
    layers = [DenseLayer(np.zeros((3, 2)), np.ones(3)), DenseLayer(np.ones((2, 3)), np.zeros(2))]
    raster = rasterize(NetworkModel(layers, 2, 2), SlicePlane.axes(resolution=(8, 8)))
    assert np.all(raster.activation_rate == 1.0)
    assert unique_region_count(raster) == 1


def test_region_count_matches_independent_dedup():
    model = random_network((8, 8), seed=0)
    plane = SlicePlane.axes(resolution=(40, 30))
    raster = rasterize(model, plane, chunk_size=100)
    points = plane.points().reshape(-1, 2)
    digests = [forward(model, p).pattern.digest() for p in points]
    assert unique_region_count(raster) == len(set(digests))
    assert raster.pattern_hash.reshape(-1).tolist() == digests


def test_out_of_bounds_pixels():
    model = random_network((4,), seed=1)
    raster = rasterize(model, SlicePlane.axes(extent=(-2.0, 2.0, -2.0, 2.0), resolution=(8, 8)))
    assert raster.out_of_bounds[0, 0] and not raster.out_of_bounds[3, 3]
    rgb = render(raster, "class", "ppm")[len(b"P6\n8 8\n255\n") :]
    assert rgb[:3] == bytes([255, 255, 255])


def test_pixel_centers_and_orientation():
    s, t = SlicePlane.axes(resolution=(4, 2)).pixel_coordinates()
    assert s[0].tolist() == [-0.75, -0.25, 0.25, 0.75]
    assert t[:, 0].tolist() == [0.5, -0.5]


def test_plane_through_points():
    rng = np.random.default_rng(2)
    p0, p1, p2 = rng.uniform(-1, 1, size=(3, 5))
    plane = SlicePlane.from_points(p0, p1, p2)
    assert np.linalg.norm(plane.u) == pytest.approx(1.0)
    assert plane.u @ plane.v == pytest.approx(0.0, abs=1e-12)
    for p in (p0, p1, p2):
        s, t = (p - p0) @ plane.u, (p - p0) @ plane.v
        assert np.allclose(p0 + s * plane.u + t * plane.v, p)
        u_min, u_max, v_min, v_max = plane.extent
        assert u_min <= s <= u_max and v_min <= t <= v_max
    with pytest.raises(ValueError):
        SlicePlane.from_points(p0, p1, 2 * p1 - p0)


def test_random_plane_is_orthonormal():
    plane = SlicePlane.random(7, seed=3)
    assert np.linalg.norm(plane.v) == pytest.approx(1.0)
    assert plane.u @ plane.v == pytest.approx(0.0, abs=1e-12)
    assert plane.points().shape == (200, 200, 7)
