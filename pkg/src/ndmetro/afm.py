"""AFM height-map analysis: plane leveling, pillar heights, base flatness and
apparent footprint areas."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import FitError, InvalidArgumentError
from .io import HeightMap
from .segment import associate_grid, label_components, StructureMeasurement

logger = logging.getLogger(__name__)

MIN_BASE_FRACTION = 0.10
BASE_RANGE_FRACTION = 0.25
BASE_GUARD_POINTS = 2


@dataclass
class LeveledMap:
    heights: np.ndarray
    plane: tuple[float, float, float]
    base_mask: np.ndarray
    pixel_scale: float


@dataclass(frozen=True)
class HeightMeasurement:
    grid_index: tuple[int, int] | None
    height: float
    top_flatness_pp: float
    center_height: float
    footprint_area: float | None = None


def _coords(shape, scale):
    x = (np.arange(shape[1], dtype=float) + 0.5) * scale
    y = (np.arange(shape[0], dtype=float) + 0.5) * scale
    return np.broadcast_to(x[None, :], shape), np.broadcast_to(y[:, None], shape)


def fit_plane(heights, mask, scale) -> tuple[float, float, float]:
    """Least-squares plane ``z = a x + b y + c`` over masked points (x, y in nm)."""
    heights = np.asarray(heights, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    X, Y = _coords(heights.shape, scale)
    xs, ys, zs = X[mask], Y[mask], heights[mask]
    if zs.size < 3:
        raise FitError("plane fit needs at least three support points")
    # centred design matrix keeps the rank test well conditioned
    x0, y0 = xs.mean(), ys.mean()
    A = np.column_stack([xs - x0, ys - y0, np.ones_like(xs)])
    coef, _, rank, sv = np.linalg.lstsq(A, zs, rcond=None)
    if rank < 3 or sv[-1] <= 1e-9 * sv[0]:
        raise FitError("plane fit support is degenerate (collinear points)")
    a, b, c = coef
    return float(a), float(b), float(c - a * x0 - b * y0)


def level_plane(hmap: HeightMap, base_mask) -> LeveledMap:
    """Subtract the plane fitted over ``base_mask``.

    The constant term is then shifted so that the median of the leveled base
    is exactly zero.
    """
    mask = np.asarray(base_mask, dtype=bool)
    if mask.shape != hmap.heights.shape:
        raise InvalidArgumentError("base mask shape does not match the map")
    if mask.mean() < MIN_BASE_FRACTION:
        raise FitError(f"base mask covers {100 * mask.mean():.1f}% of points, need >= 10%")
    a, b, c = fit_plane(hmap.heights, mask, hmap.pixel_scale)
    X, Y = _coords(hmap.heights.shape, hmap.pixel_scale)
    leveled = hmap.heights - (a * X + b * Y + c)
    shift = float(np.median(leveled[mask]))
    leveled = leveled - shift
    return LeveledMap(leveled, (a, b, c + shift), mask, hmap.pixel_scale)


def auto_base_mask(hmap: HeightMap) -> np.ndarray:
    """Base region: points in the lowest quarter of the height range after a
    provisional plane fit, refined once, minus a guard band around pillars."""
    h = hmap.heights
    full = np.ones(h.shape, dtype=bool)
    resid = h - _plane_values(h.shape, hmap.pixel_scale, fit_plane(h, full, hmap.pixel_scale))
    mask = full
    for _ in range(2):
        lo, hi = float(resid.min()), float(resid.max())
        mask = resid <= lo + BASE_RANGE_FRACTION * (hi - lo)
        plane = fit_plane(h, mask, hmap.pixel_scale)
        resid = h - _plane_values(h.shape, hmap.pixel_scale, plane)
    raised = ~mask
    if raised.any():
        raised = ndimage.binary_dilation(raised, structure=np.ones((3, 3), bool),
                                         iterations=BASE_GUARD_POINTS)
    return ~raised


def _plane_values(shape, scale, plane):
    X, Y = _coords(shape, scale)
    a, b, c = plane
    return a * X + b * Y + c


def level(hmap: HeightMap) -> LeveledMap:
    return level_plane(hmap, auto_base_mask(hmap))


def detect_structures(leveled: LeveledMap, z: float | None = None, min_points: int = 4):
    """Label raised regions above ``z`` (default: half the 99.5th percentile).

    Returns a list of ``(StructureMeasurement, full-size boolean mask)``.
    """
    h = leveled.heights
    if z is None:
        z = 0.5 * float(np.percentile(h, 99.5))
    scale = leveled.pixel_scale
    out = []
    for comp in label_components(h > z, 8):
        if comp.pixel_count < min_points:
            continue
        rr, cc = np.nonzero(comp.mask)
        rs, cs = comp.slices
        mask = np.zeros(h.shape, dtype=bool)
        mask[comp.slices] = comp.mask
        m = StructureMeasurement(
            component_id=len(out) + 1,
            pixel_count=comp.pixel_count,
            area=comp.pixel_count * scale * scale,
            centroid=(float((cc.mean() + cs.start + 0.5) * scale),
                      float((rr.mean() + rs.start + 0.5) * scale)),
            bbox=(rs.start, cs.start, rs.stop, cs.stop),
        )
        out.append((m, mask))
    return out


def _top_region(mask: np.ndarray) -> np.ndarray:
    """Erode the footprint until at most half of its points remain."""
    target = 0.5 * mask.sum()
    region = mask
    while region.sum() > target:
        nxt = ndimage.binary_erosion(region)
        if not nxt.any():
            break
        region = nxt
    return region


def extract_heights(leveled: LeveledMap, structures) -> list[HeightMeasurement]:
    """Robust top height for each ``(grid_index, mask)`` pair.

    ``height`` is the median over the inner half of the footprint; the
    single point nearest the footprint centroid is reported alongside it.
    """
    h = leveled.heights
    results = []
    for grid_index, mask in structures:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            logger.warning("structure %s has an empty mask; skipped", grid_index)
            continue
        top = _top_region(mask)
        vals = h[top]
        rr, cc = np.nonzero(mask)
        center = h[int(round(rr.mean())), int(round(cc.mean()))]
        results.append(HeightMeasurement(
            grid_index=grid_index,
            height=float(np.median(vals)),
            top_flatness_pp=float(np.ptp(vals)),
            center_height=float(center),
            footprint_area=float(mask.sum() * leveled.pixel_scale ** 2),
        ))
    return results


def base_flatness(leveled: LeveledMap) -> dict:
    base = leveled.heights[leveled.base_mask]
    p1, p99 = np.percentile(base, [1, 99])
    return {"pp": float(np.ptp(base)), "p1_p99": float(p99 - p1)}


def lattice_windows(shape, pixel_scale, pitch, origin, rows, cols):
    """Pixel windows of one pitch centred on each lattice point."""
    windows = []
    for i in range(rows):
        for j in range(cols):
            cx = origin[0] + j * pitch
            cy = origin[1] + i * pitch
            c0 = max(int(math.floor((cx - pitch / 2) / pixel_scale)), 0)
            c1 = min(int(math.floor((cx + pitch / 2) / pixel_scale)), shape[1])
            r0 = max(int(math.floor((cy - pitch / 2) / pixel_scale)), 0)
            r1 = min(int(math.floor((cy + pitch / 2) / pixel_scale)), shape[0])
            windows.append(((i, j), (slice(r0, r1), slice(c0, c1))))
    return windows


def area_above_threshold(leveled: LeveledMap, z: float, windows) -> dict:
    """Apparent footprint area (nm^2) per window: points above ``z`` times the
    point area. No tip deconvolution is applied."""
    if not (math.isfinite(z) and z > 0):
        raise InvalidArgumentError(f"threshold must be positive, got {z!r}")
    point_area = leveled.pixel_scale ** 2
    return {key: float(np.count_nonzero(leveled.heights[sl] > z) * point_area)
            for key, sl in windows}


def analyze_heightmap(hmap: HeightMap, pitch: float, origin, lattice_shape=None,
                      z: float | None = None):
    """Level, detect, grid-associate and measure every pillar in a map.

    Returns ``(leveled, heights, summary)``. Apparent areas are counted at
    ``z`` (default half the median pillar height) inside per-site windows.
    """
    leveled = level(hmap)
    found = detect_structures(leveled)
    assoc = associate_grid([m for m, _ in found], pitch, origin, lattice_shape)
    pairs = [(a.grid_index, mask) for a, (_, mask) in zip(assoc, found) if a.grid_index is not None]
    heights = extract_heights(leveled, pairs)
    if heights:
        z_area = z if z is not None else 0.5 * float(np.median([m.height for m in heights]))
        if lattice_shape is None:
            lattice_shape = (max(m.grid_index[0] for m in heights) + 1,
                             max(m.grid_index[1] for m in heights) + 1)
        windows = lattice_windows(hmap.heights.shape, hmap.pixel_scale, pitch, origin,
                                  *lattice_shape)
        areas = area_above_threshold(leveled, z_area, windows)
        heights = [HeightMeasurement(m.grid_index, m.height, m.top_flatness_pp, m.center_height,
                                     areas.get(m.grid_index)) for m in heights]
    values = np.array([m.height for m in heights])
    flat = base_flatness(leveled)
    summary = {
        "n": int(values.size),
        "mean_nm": float(values.mean()) if values.size else float("nan"),
        "sd_nm": float(values.std(ddof=1)) if values.size > 1 else float("nan"),
        "rsd_percent": float(100 * values.std(ddof=1) / values.mean()) if values.size > 1 else float("nan"),
        "base_flatness_pp_nm": flat["pp"],
        "base_flatness_p1_p99_nm": flat["p1_p99"],
        "plane": list(leveled.plane),
        "area_convention": "apparent (no tip deconvolution)",
    }
    return leveled, heights, summary
