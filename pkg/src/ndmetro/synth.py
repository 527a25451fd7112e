"""Synthetic SEM images and AFM height maps of pillar lattices with known truth.

Every structure draws its random numbers from its own generator, seeded from
``(scene seed, grid index)``. Outlier selection, jitter and heights therefore
do not depend on traversal order, and SEM and AFM scenes built from the same
lattice and seed share one lateral layout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSpecError, SceneTooLargeError
from .io import Calibration, GrayImage, HeightMap, SceneManifest, StructureRecord
from .raster import footprint_coverage

_MIN_AREA_FACTOR = 0.05
_STRUCTURE_TAG = 0
_NOISE_TAG = 1
_IMAGE_TAG = 2


def _seed_from(entropy: int, key: tuple[int, ...]) -> int:
    ss = np.random.SeedSequence(int(entropy), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_structure_seed(global_seed: int, grid_index: tuple[int, int]) -> int:
    """64-bit seed for one lattice site; a pure function of its arguments."""
    i, j = grid_index
    if i < 0 or j < 0:
        raise InvalidSpecError(f"grid index must be non-negative, got {grid_index}")
    return _seed_from(global_seed, (_STRUCTURE_TAG, i, j))


def derive_image_seed(dataset_seed: int, image_number: int) -> int:
    return _seed_from(dataset_seed, (_IMAGE_TAG, image_number))


def _noise_seed(scene_seed: int) -> int:
    return _seed_from(scene_seed, (_NOISE_TAG,))


@dataclass
class LatticeSpec:
    """Lattice layout and per-structure variability shared by SEM and AFM scenes.

    ``length`` runs along x, ``width`` along y. Disc scenes use ``diameter``.
    ``outlier_fraction`` of the structures (rounded to a whole number) are
    scaled laterally by ``outlier_scale``.
    """

    rows: int = 1
    cols: int = 1
    pitch: float = 500.0
    shape: str = "rect"
    length: float = 65.0
    width: float = 40.0
    diameter: float = 60.0
    area_jitter_rsd: float = 0.0
    outlier_fraction: float = 0.0
    outlier_scale: float = 1.3
    position_jitter: float = 0.0
    nominal_height: float = 68.2

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidSpecError("lattice needs at least one row and one column")
        if self.shape not in ("rect", "disc"):
            raise InvalidSpecError(f"unknown shape {self.shape!r}")
        sizes = (self.pitch, self.nominal_height) + self.dims
        if not all(math.isfinite(v) and v > 0 for v in sizes):
            raise InvalidSpecError("pitch, height and shape dimensions must be positive")
        for name in ("area_jitter_rsd", "outlier_fraction"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise InvalidSpecError(f"{name} must lie in [0, 1), got {v}")
        if self.outlier_scale <= 0 or self.position_jitter < 0:
            raise InvalidSpecError("outlier_scale must be positive, position_jitter non-negative")
        if self.pitch <= self.max_extent:
            raise InvalidSpecError(
                f"pitch {self.pitch} nm does not exceed structure extent {self.max_extent:.1f} nm")

    @property
    def dims(self) -> tuple[float, ...]:
        return (self.length, self.width) if self.shape == "rect" else (self.diameter,)

    @property
    def max_extent(self) -> float:
        scale = max(1.0, self.outlier_scale if self.outlier_fraction > 0 else 1.0)
        return max(self.dims) * scale

    @property
    def count(self) -> int:
        return self.rows * self.cols


@dataclass
class SceneSpec:
    """SEM rendering parameters. Intensities are gray levels, sizes nm."""

    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    edge_ring_width: float = 4.0
    background_level: float = 30.0
    interior_level: float = 128.0
    ring_gain: float = 220.0 / 128.0
    gradient_x: float = 0.0
    gradient_y: float = 0.0
    noise_sigma: float = 0.0
    depth: int = 8
    image_width: int | None = None
    image_height: int | None = None
    seed: int = 0

    def validate(self):
        self.lattice.validate()
        if self.edge_ring_width < 0 or self.noise_sigma < 0 or self.ring_gain <= 0:
            raise InvalidSpecError("ring width, noise sigma must be non-negative; ring gain positive")
        if self.depth not in (8, 16):
            raise InvalidSpecError("depth must be 8 or 16")
        if self.seed < 0:
            raise InvalidSpecError("seed must be non-negative")

    @property
    def ring_level(self) -> float:
        return self.interior_level * self.ring_gain

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> SceneSpec:
        doc = dict(doc)
        lattice = LatticeSpec(**doc.pop("lattice", {}))
        return cls(lattice=lattice, **doc)


@dataclass
class AfmSceneSpec:
    """AFM scene: lattice plus pillar heights, substrate tilt and roughness.

    Tilt is in nm per µm along each axis. Roughness is white and bounded so
    that its peak-to-peak never exceeds ``base_roughness_pp``.
    """

    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    mean_height: float = 68.2
    height_sd: float = 0.0
    base_roughness_pp: float = 0.0
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    image_width: int | None = None
    image_height: int | None = None
    seed: int = 0

    def validate(self):
        self.lattice.validate()
        if not self.mean_height > 0 or self.height_sd < 0 or self.base_roughness_pp < 0:
            raise InvalidSpecError("mean_height must be positive, height_sd and roughness non-negative")
        if self.seed < 0:
            raise InvalidSpecError("seed must be non-negative")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> AfmSceneSpec:
        doc = dict(doc)
        lattice = LatticeSpec(**doc.pop("lattice", {}))
        return cls(lattice=lattice, **doc)


@dataclass(frozen=True)
class PlacedStructure:
    grid_index: tuple[int, int]
    center: tuple[float, float]
    dims: tuple[float, ...]
    is_outlier: bool
    height: float

    @property
    def area(self) -> float:
        if len(self.dims) == 2:
            return self.dims[0] * self.dims[1]
        return math.pi * (self.dims[0] / 2.0) ** 2


def lattice_origin(lattice: LatticeSpec) -> tuple[float, float]:
    """Position (nm) of grid point (0, 0); leaves a half-pitch margin."""
    return lattice.pitch / 2.0, lattice.pitch / 2.0


def image_shape_for(lattice: LatticeSpec, pixel_scale: float, width=None, height=None):
    need_w = lattice.cols * lattice.pitch / pixel_scale
    need_h = lattice.rows * lattice.pitch / pixel_scale
    w = int(math.ceil(need_w - 1e-9)) if width is None else int(width)
    h = int(math.ceil(need_h - 1e-9)) if height is None else int(height)
    if w + 1e-9 < need_w or h + 1e-9 < need_h:
        raise SceneTooLargeError(
            f"lattice needs {need_w:.1f} x {need_h:.1f} px, image is {w} x {h} px")
    return h, w


def build_layout(lattice: LatticeSpec, seed: int, mean_height: float | None = None,
                 height_sd: float = 0.0) -> list[PlacedStructure]:
    lattice.validate()
    ox, oy = lattice_origin(lattice)
    draws = {}
    seeds = set()
    for i in range(lattice.rows):
        for j in range(lattice.cols):
            s = derive_structure_seed(seed, (i, j))
            if s in seeds:
                raise InvalidSpecError(f"structure seed collision at {(i, j)}")
            seeds.add(s)
            rng = np.random.default_rng(s)
            # fixed draw order: area, outlier rank, dx, dy, height
            draws[(i, j)] = (rng.standard_normal(), rng.random(), rng.standard_normal(),
                             rng.standard_normal(), rng.standard_normal())

    n_out = int(round(lattice.outlier_fraction * lattice.count))
    ranked = sorted(draws, key=lambda k: (draws[k][1], k))
    outliers = set(ranked[:n_out])

    max_shift = 0.25 * lattice.pitch
    base_h = lattice.nominal_height if mean_height is None else mean_height
    placed = []
    for (i, j), (za, _, zx, zy, zh) in sorted(draws.items()):
        factor = max(1.0 + lattice.area_jitter_rsd * za, _MIN_AREA_FACTOR)
        lateral = math.sqrt(factor)
        if (i, j) in outliers:
            lateral *= lattice.outlier_scale
        dx = float(np.clip(lattice.position_jitter * zx, -max_shift, max_shift))
        dy = float(np.clip(lattice.position_jitter * zy, -max_shift, max_shift))
        center = (ox + j * lattice.pitch + dx, oy + i * lattice.pitch + dy)
        height = max(base_h + height_sd * zh, 1e-3)
        placed.append(PlacedStructure((i, j), center, tuple(d * lateral for d in lattice.dims),
                                      (i, j) in outliers, height))
    return placed


def _paste(window_shape, offset, slices, cov):
    out = np.zeros(window_shape)
    rs, cs = slices
    if cov.size:
        out[rs.start - offset[0]:rs.stop - offset[0], cs.start - offset[1]:cs.stop - offset[1]] = cov
    return out


def _manifest(kind, lattice, placed, pixel_scale, seed, shape) -> SceneManifest:
    records = [
        StructureRecord(p.grid_index, p.center, p.area, p.height,
                        lattice.shape, p.is_outlier)
        for p in placed
    ]
    return SceneManifest(pixel_scale=pixel_scale, pitch=lattice.pitch, seed=seed,
                         image_width=shape[1], image_height=shape[0],
                         origin=lattice_origin(lattice), kind=kind, structures=records)


def render_sem(spec: SceneSpec, calibration: Calibration, placed: list[PlacedStructure]):
    scale = calibration.pixel_scale
    shape = image_shape_for(spec.lattice, scale, spec.image_width, spec.image_height)
    rows = np.arange(shape[0], dtype=float)[:, None]
    cols = np.arange(shape[1], dtype=float)[None, :]
    canvas = spec.background_level + spec.gradient_x * cols + spec.gradient_y * rows
    canvas = np.broadcast_to(canvas, shape).copy()
    ring_px = spec.edge_ring_width / scale
    for p in placed:
        cx, cy = p.center[0] / scale, p.center[1] / scale
        dims = tuple(d / scale for d in p.dims)
        rs, cs, outer = footprint_coverage(spec.lattice.shape, cx, cy, dims, shape)
        if outer.size == 0:
            continue
        inner_slices = footprint_coverage(spec.lattice.shape, cx, cy, dims, shape, shrink=ring_px)
        inner = _paste(outer.shape, (rs.start, cs.start), inner_slices[:2], inner_slices[2])
        bg = canvas[rs, cs]
        sprite = bg * (1.0 - outer) + spec.ring_level * (outer - inner) + spec.interior_level * inner
        np.maximum(canvas[rs, cs], sprite, out=canvas[rs, cs])
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(_noise_seed(spec.seed))
        canvas += spec.noise_sigma * rng.standard_normal(shape)
    maxval = (1 << spec.depth) - 1
    pixels = np.clip(np.rint(canvas), 0, maxval).astype(np.uint8 if spec.depth == 8 else np.uint16)
    return GrayImage(pixels, spec.depth)


def generate_sem(spec: SceneSpec, calibration: Calibration) -> tuple[GrayImage, SceneManifest]:
    """Render a bright-ring SEM-style image and its ground-truth manifest.

    Manifest areas are the analytic outer footprints after jitter and outlier
    scaling; the ring lies inside the footprint.
    """
    spec.validate()
    shape = image_shape_for(spec.lattice, calibration.pixel_scale, spec.image_width,
                            spec.image_height)
    placed = build_layout(spec.lattice, spec.seed)
    image = render_sem(spec, calibration, placed)
    return image, _manifest("sem", spec.lattice, placed, calibration.pixel_scale, spec.seed, shape)


def _roughness(rng, shape, pp):
    if pp <= 0:
        return np.zeros(shape)
    # clipped to 90 % of the band so a later plane fit cannot push p-p past pp
    return np.clip(rng.standard_normal(shape) * (pp / 6.0), -0.45 * pp, 0.45 * pp)


def render_afm(spec: AfmSceneSpec, calibration: Calibration, placed: list[PlacedStructure]):
    scale = calibration.pixel_scale
    shape = image_shape_for(spec.lattice, scale, spec.image_width, spec.image_height)
    x_nm = (np.arange(shape[1], dtype=float) + 0.5) * scale
    y_nm = (np.arange(shape[0], dtype=float) + 0.5) * scale
    heights = (spec.tilt_x / 1000.0) * x_nm[None, :] + (spec.tilt_y / 1000.0) * y_nm[:, None]
    heights = np.broadcast_to(heights, shape).copy()
    pillars = np.zeros(shape)
    for p in placed:
        dims = tuple(d / scale for d in p.dims)
        rs, cs, cov = footprint_coverage(spec.lattice.shape, p.center[0] / scale,
                                         p.center[1] / scale, dims, shape)
        if cov.size:
            np.maximum(pillars[rs, cs], p.height * cov, out=pillars[rs, cs])
    heights += pillars
    rng = np.random.default_rng(_noise_seed(spec.seed))
    heights += _roughness(rng, shape, spec.base_roughness_pp)
    return HeightMap(heights, scale)


def generate_afm(spec: AfmSceneSpec, calibration: Calibration) -> tuple[HeightMap, SceneManifest]:
    spec.validate()
    shape = image_shape_for(spec.lattice, calibration.pixel_scale, spec.image_width,
                            spec.image_height)
    placed = build_layout(spec.lattice, spec.seed, spec.mean_height, spec.height_sd)
    hmap = render_afm(spec, calibration, placed)
    return hmap, _manifest("afm", spec.lattice, placed, calibration.pixel_scale, spec.seed, shape)
