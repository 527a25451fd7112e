"""Exact-coverage rasterization of axis-aligned rectangles and discs.

Pixel ``(r, c)`` is the unit square ``[c, c+1) x [r, r+1)`` in pixel units.
Coverage is the geometric area of the footprint inside that square, so an
interior pixel is exactly 1.0 and the coverage sum equals the analytic area
up to round-off.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError

_SNAP = 1e-10


def _window(lo: float, hi: float, limit: int) -> tuple[int, int]:
    return max(int(math.floor(lo)), 0), min(int(math.ceil(hi)), limit)


def _interval_overlap(start: int, stop: int, a: float, b: float) -> np.ndarray:
    edges = np.arange(start, stop, dtype=float)
    return np.clip(np.minimum(edges + 1.0, b) - np.maximum(edges, a), 0.0, 1.0)


def rect_coverage(cx: float, cy: float, length: float, width: float, shape: tuple[int, int]):
    """Coverage of a rectangle centred at (cx, cy), ``length`` along x.

    Returns ``(row_slice, col_slice, coverage)`` restricted to the image.
    """
    x0, x1 = cx - length / 2.0, cx + length / 2.0
    y0, y1 = cy - width / 2.0, cy + width / 2.0
    c0, c1 = _window(x0, x1, shape[1])
    r0, r1 = _window(y0, y1, shape[0])
    if c1 <= c0 or r1 <= r0 or length <= 0 or width <= 0:
        return slice(r0, r0), slice(c0, c0), np.zeros((0, 0))
    cov = np.outer(_interval_overlap(r0, r1, y0, y1), _interval_overlap(c0, c1, x0, x1))
    return slice(r0, r1), slice(c0, c1), cov


def _half_chord_integral(u, r):
    # antiderivative of sqrt(r^2 - t^2)
    u = np.clip(u, -r, r)
    return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(u / r))


def _clipped_column_integral(X, y, r):
    """Integral over t in [-r, X] of clip(y, -s(t), s(t)), s(t) = sqrt(r^2 - t^2)."""
    Xc = np.clip(X, -r, r)
    c = np.sqrt(np.maximum(r * r - y * y, 0.0))
    sg = np.sign(y)
    S = _half_chord_integral
    left = S(np.minimum(Xc, -c), r) - S(-r, r)
    middle = np.clip(Xc, -c, c) + c
    right = S(np.maximum(Xc, c), r) - S(c, r)
    return sg * (left + right) + y * middle


def disc_coverage(cx: float, cy: float, radius: float, shape: tuple[int, int]):
    """Exact coverage of a disc; same return convention as :func:`rect_coverage`."""
    c0, c1 = _window(cx - radius, cx + radius, shape[1])
    r0, r1 = _window(cy - radius, cy + radius, shape[0])
    if c1 <= c0 or r1 <= r0 or radius <= 0:
        return slice(r0, r0), slice(c0, c0), np.zeros((0, 0))
    xe = np.arange(c0, c1 + 1, dtype=float) - cx
    ye = np.arange(r0, r1 + 1, dtype=float) - cy
    F = _clipped_column_integral(xe[None, :], ye[:, None], radius)
    # inclusion-exclusion over pixel corners; F is indexed [y_edge, x_edge]
    cov = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    cov = np.clip(cov, 0.0, 1.0)
    cov[cov > 1.0 - _SNAP] = 1.0
    cov[cov < _SNAP] = 0.0
    return slice(r0, r1), slice(c0, c1), cov


def footprint_coverage(shape_kind: str, cx: float, cy: float, dims: tuple[float, ...],
                       image_shape: tuple[int, int], shrink: float = 0.0):
    """Coverage of a rect (length, width) or disc (diameter), optionally shrunk
    inward by ``shrink`` pixels on every side."""
    if shape_kind == "rect":
        return rect_coverage(cx, cy, dims[0] - 2 * shrink, dims[1] - 2 * shrink, image_shape)
    if shape_kind == "disc":
        return disc_coverage(cx, cy, dims[0] / 2.0 - shrink, image_shape)
    raise InvalidArgumentError(f"unknown shape {shape_kind!r}")
