"""Threshold, label, fill and measure bright structures in calibrated images."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import DegenerateHistogramError, InvalidArgumentError, ValidationError
from .io import Calibration, GrayImage

THRESHOLD_MODES = ("otsu", "fixed", "tiled_otsu")
BORDER_POLICIES = ("exclude_touching", "include")


@dataclass(frozen=True)
class SegmentationConfig:
    threshold_mode: str = "otsu"
    level: int | None = None
    tile_px: int = 256
    level_offset: int = 0
    connectivity: int = 8
    min_area: float = 0.0
    max_area: float = math.inf
    border_policy: str = "exclude_touching"
    fill_holes: bool = True

    def __post_init__(self):
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValidationError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        if self.threshold_mode == "fixed" and self.level is None:
            raise ValidationError("fixed threshold mode needs a level")
        if self.tile_px < 16:
            raise ValidationError("tile_px must be at least 16")
        if self.connectivity not in (4, 8):
            raise ValidationError("connectivity must be 4 or 8")
        if not self.min_area < self.max_area:
            raise ValidationError("min_area must be below max_area")
        if self.border_policy not in BORDER_POLICIES:
            raise ValidationError(f"border_policy must be one of {BORDER_POLICIES}")


@dataclass(frozen=True)
class StructureMeasurement:
    component_id: int
    pixel_count: int
    area: float
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    grid_index: tuple[int, int] | None = None
    tile_id: int | None = None
    conflict: bool = False


@dataclass(frozen=True)
class Component:
    label: int
    slices: tuple[slice, slice]
    mask: np.ndarray

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())


def otsu_threshold(histogram) -> int:
    """Otsu level for a histogram; pixels ``>= level`` are foreground.

    The between-class variance is evaluated in exact integer arithmetic from
    terms that do not change when the histogram is shifted, so a brightness
    offset moves the level by exactly that offset. Ties go to the lowest level.
    """
    hist = [int(v) for v in np.asarray(histogram).ravel()]
    if any(v < 0 for v in hist):
        raise InvalidArgumentError("histogram counts must be non-negative")
    populated = [i for i, v in enumerate(hist) if v > 0]
    if len(populated) < 2:
        raise DegenerateHistogramError("histogram has fewer than two populated bins")
    lo, hi = populated[0], populated[-1]
    total = sum(hist)
    total_moment = sum((i - lo) * v for i, v in enumerate(hist) if v)
    best_level, best_num, best_den = lo + 1, -1, 1
    n0 = s0 = 0
    for t in range(lo + 1, hi + 1):
        n0 += hist[t - 1]
        s0 += (t - 1 - lo) * hist[t - 1]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        d = total_moment * n0 - s0 * total
        num, den = d * d, n0 * n1
        if num * best_den > best_num * den:
            best_level, best_num, best_den = t, num, den
    return best_level


def image_histogram(pixels: np.ndarray, depth: int) -> np.ndarray:
    return np.bincount(pixels.ravel(), minlength=1 << depth)


def binarize(pixels: np.ndarray, level) -> np.ndarray:
    """Foreground where ``pixel >= level``; ``level`` may be a per-pixel array."""
    return np.asarray(pixels) >= level


def _tile_grid(shape, tile_px):
    nty = max(1, math.ceil(shape[0] / tile_px))
    ntx = max(1, math.ceil(shape[1] / tile_px))
    return nty, ntx


def threshold_levels(image: GrayImage, config: SegmentationConfig):
    """Per-pixel (or scalar) threshold level, offset included.

    In tiled mode each tile gets its own Otsu level, but only when the tile
    contains pixels above the global level and its two classes are at least
    half as far apart as the global classes; otherwise a tile of pure
    background would be split inside its own noise.
    """
    if config.threshold_mode == "fixed":
        return config.level + config.level_offset
    hist = image_histogram(image.pixels, image.depth)
    global_level = otsu_threshold(hist)
    if config.threshold_mode == "otsu":
        return global_level + config.level_offset
    global_sep = _class_separation(hist, global_level)
    nty, ntx = _tile_grid(image.pixels.shape, config.tile_px)
    levels = np.empty(image.pixels.shape, dtype=np.int64)
    t = config.tile_px
    for ty in range(nty):
        for tx in range(ntx):
            tile = image.pixels[ty * t:(ty + 1) * t, tx * t:(tx + 1) * t]
            level = global_level
            if tile.max() >= global_level:
                th = image_histogram(tile, image.depth)
                try:
                    cand = otsu_threshold(th)
                except DegenerateHistogramError:
                    cand = None
                if cand is not None and _class_separation(th, cand) >= 0.5 * global_sep:
                    level = cand
            levels[ty * t:(ty + 1) * t, tx * t:(tx + 1) * t] = level + config.level_offset
    return levels


def _class_separation(hist, level) -> float:
    hist = np.asarray(hist, dtype=float)
    idx = np.arange(hist.size)
    lo, hi = hist[:level], hist[level:]
    if lo.sum() == 0 or hi.sum() == 0:
        return 0.0
    return float((idx[level:] * hi).sum() / hi.sum() - (idx[:level] * lo).sum() / lo.sum())


def label_components(mask: np.ndarray, connectivity: int = 8) -> list[Component]:
    """Connected components, numbered in raster order of their first pixel."""
    if connectivity not in (4, 8):
        raise InvalidArgumentError("connectivity must be 4 or 8")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=structure)
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        out.append(Component(k, sl, labels[sl] == k))
    return out


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background regions not connected to the edge of ``mask``."""
    return ndimage.binary_fill_holes(np.asarray(mask, dtype=bool))


def _touches_border(sl, shape) -> bool:
    rs, cs = sl
    return rs.start == 0 or cs.start == 0 or rs.stop == shape[0] or cs.stop == shape[1]


def measure(image: GrayImage, calibration: Calibration,
            config: SegmentationConfig = SegmentationConfig()) -> list[StructureMeasurement]:
    """Measure every structure that survives area and border filtering.

    Areas are filled pixel counts times the pixel area (nm^2); centroids are
    pixel-centre means in nm. Kept structures are renumbered 1..K in raster
    order.
    """
    levels = threshold_levels(image, config)
    mask = binarize(image.pixels, levels)
    shape = mask.shape
    pixel_area = calibration.pixel_area
    scale = calibration.pixel_scale
    nty, ntx = _tile_grid(shape, config.tile_px)
    results = []
    for comp in label_components(mask, config.connectivity):
        if config.border_policy == "exclude_touching" and _touches_border(comp.slices, shape):
            continue
        filled = fill_holes(comp.mask) if config.fill_holes else comp.mask
        count = int(filled.sum())
        area = count * pixel_area
        if not config.min_area <= area <= config.max_area:
            continue
        rr, cc = np.nonzero(filled)
        rs, cs = comp.slices
        cy = (rr.mean() + rs.start + 0.5) * scale
        cx = (cc.mean() + cs.start + 0.5) * scale
        tile_id = None
        if config.threshold_mode == "tiled_otsu":
            ty = min(int(cy / scale) // config.tile_px, nty - 1)
            tx = min(int(cx / scale) // config.tile_px, ntx - 1)
            tile_id = ty * ntx + tx
        results.append(StructureMeasurement(
            component_id=len(results) + 1,
            pixel_count=count,
            area=area,
            centroid=(float(cx), float(cy)),
            bbox=(rs.start, cs.start, rs.stop, cs.stop),
            tile_id=tile_id,
        ))
    return results


def associate_grid(measurements, pitch: float, origin=(0.0, 0.0), lattice_shape=None):
    """Assign each centroid to its nearest lattice point.

    ``origin`` is the position of grid point (0, 0) in nm. Points outside
    ``lattice_shape`` (rows, cols), when given, get no index. Every
    measurement sharing a lattice point with another is flagged ``conflict``.
    """
    if pitch <= 0:
        raise InvalidArgumentError("pitch must be positive")
    assigned = []
    for m in measurements:
        j = math.floor((m.centroid[0] - origin[0]) / pitch + 0.5)
        i = math.floor((m.centroid[1] - origin[1]) / pitch + 0.5)
        idx = (i, j)
        if lattice_shape is not None and not (0 <= i < lattice_shape[0] and 0 <= j < lattice_shape[1]):
            idx = None
        assigned.append(idx)
    counts = {}
    for idx in assigned:
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    return [replace(m, grid_index=idx, conflict=idx is not None and counts[idx] > 1)
            for m, idx in zip(measurements, assigned)]


def perimeter_area_bound(shape_kind: str, dims_nm, pixel_scale: float) -> float:
    """Anti-aliasing error bound: footprint perimeter (px) times pixel area."""
    if shape_kind == "rect":
        perimeter_nm = 2.0 * (dims_nm[0] + dims_nm[1])
    else:
        perimeter_nm = math.pi * dims_nm[0]
    return perimeter_nm / pixel_scale * pixel_scale ** 2


MEASUREMENT_COLUMNS = ("image_id", "component_id", "grid_i", "grid_j", "pixel_count",
                       "area_nm2", "centroid_x_nm", "centroid_y_nm", "tile_id")


def measurement_rows(image_id: str, measurements):
    for m in measurements:
        gi, gj = m.grid_index if m.grid_index is not None else (None, None)
        yield (image_id, m.component_id, gi, gj, m.pixel_count, m.area,
               m.centroid[0], m.centroid[1], m.tile_id)
