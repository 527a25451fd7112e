import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from shapely.geometry import Point, box

from ndmetro.errors import InvalidArgumentError
from ndmetro.raster import disc_coverage, footprint_coverage, rect_coverage


def _full(result, shape):
    rs, cs, cov = result
    out = np.zeros(shape)
    out[rs, cs] = cov
    return out


def _polygon_oracle(geom, shape):
    # exact pixel/polygon overlap areas from an independent geometry library
    out = np.zeros(shape)
    minx, miny, maxx, maxy = geom.bounds
    for r in range(max(int(miny), 0), min(int(math.ceil(maxy)), shape[0])):
        for c in range(max(int(minx), 0), min(int(math.ceil(maxx)), shape[1])):
            out[r, c] = geom.intersection(box(c, r, c + 1, r + 1)).area
    return out


def test_rect_interior_pixels_are_one():
    cov = _full(rect_coverage(10.0, 10.0, 8.0, 6.0, (20, 20)), (20, 20))
    assert cov.sum() == pytest.approx(48.0)
    assert set(np.unique(cov)) == {0.0, 1.0}


def test_rect_subpixel_offset_matches_oracle():
    shape = (16, 18)
    cov = _full(rect_coverage(8.3, 7.71, 9.4, 5.2, shape), shape)
    oracle = _polygon_oracle(box(8.3 - 4.7, 7.71 - 2.6, 8.3 + 4.7, 7.71 + 2.6), shape)
    np.testing.assert_allclose(cov, oracle, atol=1e-12)


@given(st.floats(3, 17), st.floats(3, 17), st.floats(0.2, 6))
def test_disc_matches_polygon_oracle(cx, cy, r):
    shape = (20, 20)
    cov = _full(disc_coverage(cx, cy, r, shape), shape)
    oracle = _polygon_oracle(Point(cx, cy).buffer(r, quad_segs=512), shape)
    np.testing.assert_allclose(cov, oracle, atol=2e-5)
    assert np.all((cov >= 0) & (cov <= 1))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.3, 40))
def test_disc_total_is_analytic_area(fx, fy, r):
    n = int(2 * r) + 6
    cov = disc_coverage(n / 2 + fx, n / 2 + fy, r, (n + 2, n + 2))[2]
    assert cov.sum() == pytest.approx(math.pi * r * r, rel=1e-9, abs=1e-9)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.5, 30), st.floats(0.5, 30))
def test_rect_total_is_analytic_area(fx, fy, length, width):
    n = int(max(length, width)) + 6
    cov = rect_coverage(n / 2 + fx, n / 2 + fy, length, width, (n + 2, n + 2))[2]
    assert cov.sum() == pytest.approx(length * width, rel=1e-9)


def test_clipped_at_image_edge():
    shape = (10, 10)
    cov = _full(rect_coverage(0.0, 5.0, 4.0, 4.0, shape), shape)
    assert cov.sum() == pytest.approx(8.0)


def test_shrink_reduces_both_sides():
    shape = (30, 30)
    outer = _full(footprint_coverage("rect", 15, 15, (12, 8), shape), shape)
    inner = _full(footprint_coverage("rect", 15, 15, (12, 8), shape, shrink=1.5), shape)
    assert inner.sum() == pytest.approx(9 * 5)
    assert np.all(inner <= outer + 1e-12)
    disc_in = _full(footprint_coverage("disc", 15, 15, (12,), shape, shrink=2), shape)
    assert disc_in.sum() == pytest.approx(math.pi * 16)


def test_degenerate_footprints_are_empty():
    assert rect_coverage(5, 5, 0, 3, (10, 10))[2].size == 0
    assert disc_coverage(5, 5, -1, (10, 10))[2].size == 0
    assert rect_coverage(50, 50, 2, 2, (10, 10))[2].size == 0


def test_unknown_shape():
    with pytest.raises(InvalidArgumentError):
        footprint_coverage("hexagon", 1, 1, (1,), (4, 4))
