"""End-to-end generate -> measure -> normalize runs against synthetic truth.

Per-image work is spread over a thread pool; results are always collected
in image order, so artifacts do not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .afm import analyze_heightmap, area_above_threshold, lattice_windows, level
from .errors import InvalidArgumentError
from .io import Calibration, encode_pgm
from .segment import SegmentationConfig, associate_grid, measure
from .stats import analyze_areas, pearson, rsd
from .synth import (AfmSceneSpec, LatticeSpec, SceneSpec, derive_image_seed, generate_afm,
                    generate_sem, image_shape_for)

REALISTIC_NOISE_SIGMA = 4.0
REALISTIC_GRADIENT_LEVELS = 10.0


@dataclass
class SemPreset:
    name: str
    scene: SceneSpec
    pixel_scale: float
    n_images: int
    rejection: str = "none"
    mad_threshold: float = 3.5
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    description: str = ""


@dataclass
class AfmPreset:
    name: str
    scene: AfmSceneSpec
    pixel_scale: float
    description: str = ""


def _realistic(lattice: LatticeSpec, pixel_scale: float, ring_nm: float) -> SceneSpec:
    _, width_px = image_shape_for(lattice, pixel_scale)
    return SceneSpec(lattice=lattice, edge_ring_width=ring_nm, noise_sigma=REALISTIC_NOISE_SIGMA,
                     gradient_x=REALISTIC_GRADIENT_LEVELS / width_px)


def sem_presets() -> dict[str, SemPreset]:
    nd1 = LatticeSpec(rows=4, cols=5, pitch=200.0, shape="rect", length=65.0, width=40.0,
                      area_jitter_rsd=0.04, position_jitter=2.0)
    large = LatticeSpec(rows=2, cols=3, pitch=1000.0, shape="rect", length=400.0, width=250.0,
                        area_jitter_rsd=0.01, position_jitter=2.0, nominal_height=300.0)
    master = LatticeSpec(rows=2, cols=3, pitch=500.0, shape="disc", diameter=60.0,
                         area_jitter_rsd=0.03, outlier_fraction=0.15, outlier_scale=1.3,
                         position_jitter=2.0, nominal_height=160.0)
    return {
        "nd1": SemPreset("nd1", _realistic(nd1, 0.505, 4.0), 0.505, 22,
                         description="40 x 65 nm pillars at 505 pm/pixel, 22 images x 20 = 440"),
        "large": SemPreset("large", _realistic(large, 2.0, 6.0), 2.0, 10,
                           description="250 x 400 nm pillars at 2 nm/pixel, 10 images x 6 = 60"),
        "master-target": SemPreset("master-target", _realistic(master, 1.0, 4.0), 1.0, 33,
                                   rejection="mad_z",
                                   description="60 nm discs, 500 nm pitch, 33 images x 6, "
                                               "15 % outliers at 1.3x lateral scale"),
    }


def afm_presets() -> dict[str, AfmPreset]:
    lattice = LatticeSpec(rows=5, cols=5, pitch=300.0, shape="rect", length=65.0, width=40.0)
    scene = AfmSceneSpec(lattice=lattice, mean_height=68.2, height_sd=0.5, base_roughness_pp=1.5,
                         tilt_x=5.0, tilt_y=2.0)
    return {"afm": AfmPreset("afm", scene, 1.5, "25 pillars, 68.2 +/- 0.5 nm, 5 nm/um tilt")}


PRESET_NAMES = ("nd1", "large", "master-target", "afm", "paired")


# --------------------------------------------------------------------------
# SEM datasets


@dataclass
class ImageResult:
    image_id: str
    seed: int
    sha256: str
    rows: list[dict]
    expected: int
    detected: int


def _measure_one(scene: SceneSpec, cal: Calibration, seg: SegmentationConfig, image_id: str):
    image, manifest = generate_sem(scene, cal)
    found = measure(image, cal, seg)
    found = associate_grid(found, manifest.pitch, manifest.origin,
                           (scene.lattice.rows, scene.lattice.cols))
    truth = manifest.by_index()
    rows = []
    for m in found:
        rec = truth.get(m.grid_index) if m.grid_index is not None else None
        rows.append({
            "image_id": image_id,
            "component_id": m.component_id,
            "grid_i": None if m.grid_index is None else m.grid_index[0],
            "grid_j": None if m.grid_index is None else m.grid_index[1],
            "pixel_count": m.pixel_count,
            "area_nm2": m.area,
            "true_area_nm2": None if rec is None else rec.true_area,
            "is_outlier": None if rec is None else rec.is_outlier,
            "conflict": m.conflict,
        })
    digest = hashlib.sha256(encode_pgm(image)).hexdigest()
    return ImageResult(image_id, scene.seed, digest, rows, len(manifest.structures), len(found))


def run_sem_dataset(scene: SceneSpec, pixel_scale: float, n_images: int, seed: int,
                    seg: SegmentationConfig = SegmentationConfig(), workers: int = 1):
    cal = Calibration(pixel_scale, "synthetic")
    jobs = [(replace(scene, seed=derive_image_seed(seed, n)), f"img{n:03d}") for n in range(n_images)]
    if workers <= 1:
        return [_measure_one(s, cal, seg, iid) for s, iid in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _measure_one(job[0], cal, seg, job[1]), jobs))


def _area_matrix(results, keep=lambda row: True):
    rows, prov = [], []
    for res in results:
        sel = [r for r in res.rows if keep(r)]
        if sel:
            rows.append([r["area_nm2"] for r in sel])
            prov.append(sel)
    return rows, prov


def summarize_dataset(results, rejection="none", mad_threshold=3.5) -> dict:
    rows, prov = _area_matrix(results)
    report, dataset, masks = analyze_areas(rows, "none")
    out = {
        "images": len(results),
        "expected_structures": sum(r.expected for r in results),
        "detected_structures": sum(r.detected for r in results),
        "SAA_nm2": dataset.SAA,
        "rsd_percent": report.rsd,
        "raw_rsd_percent": rsd(dataset.flat_raw),
        "true_area_rsd_percent": _true_rsd(prov),
    }
    if rejection != "none":
        post, post_ds, masks = analyze_areas(rows, rejection, mad_threshold)
        rejected = [p for prow, m in zip(prov, masks) for p, keep in zip(prow, m) if not keep]
        labelled = [p for prow in prov for p in prow if p["is_outlier"]]
        tp = sum(1 for p in rejected if p["is_outlier"])
        out.update({
            "rejection_method": rejection,
            "mad_threshold": mad_threshold,
            "pre_rejection_rsd_percent": report.rsd,
            "post_rejection_rsd_percent": post.rsd,
            "rejected_count": len(rejected),
            "labelled_outliers": len(labelled),
            "rejection_precision": tp / len(rejected) if rejected else 1.0,
            "rejection_recall": tp / len(labelled) if labelled else 1.0,
        })
    return out


def _true_rsd(prov) -> float | None:
    vals = [p["true_area_nm2"] for prow in prov for p in prow if p["true_area_nm2"] is not None]
    return rsd(vals) if len(vals) >= 2 else None


def validate_sem(preset: SemPreset, seed: int, workers: int = 1):
    """Method floor, placement floor and total RSD for one SEM preset.

    * floor: area jitter, position jitter and outliers all zero;
    * placement: area jitter and outliers zero, position jitter as configured;
    * total: the preset as configured.

    The fabrication component is estimated by subtracting the placement floor
    in quadrature from the total (post-rejection when the preset rejects).
    Returns ``(report, measurement tables by run)``.
    """
    lat = preset.scene.lattice
    runs = {
        "floor": replace(preset.scene, lattice=replace(lat, area_jitter_rsd=0.0, position_jitter=0.0,
                                                        outlier_fraction=0.0)),
        "placement": replace(preset.scene, lattice=replace(lat, area_jitter_rsd=0.0,
                                                            outlier_fraction=0.0)),
        "total": preset.scene,
    }
    report = {
        "preset": preset.name,
        "description": preset.description,
        "seed": seed,
        "pixel_scale_nm": preset.pixel_scale,
        "configured_area_jitter_rsd_percent": 100 * lat.area_jitter_rsd,
        "area_convention": "filled outer footprint including the bright ring",
        "runs": {},
    }
    tables = {}
    for name, scene in runs.items():
        results = run_sem_dataset(scene, preset.pixel_scale, preset.n_images, seed,
                                  preset.segmentation, workers)
        rejection = preset.rejection if name == "total" else "none"
        summary = summarize_dataset(results, rejection, preset.mad_threshold)
        summary["image_sha256"] = [r.sha256 for r in results]
        report["runs"][name] = summary
        tables[name] = [row for r in results for row in r.rows]
    total_run = report["runs"]["total"]
    total = total_run.get("post_rejection_rsd_percent", total_run["rsd_percent"])
    placement = report["runs"]["placement"]["rsd_percent"]
    report["method_floor_rsd_percent"] = report["runs"]["floor"]["rsd_percent"]
    report["placement_floor_rsd_percent"] = placement
    report["total_rsd_percent"] = total_run["rsd_percent"]
    if "post_rejection_rsd_percent" in total_run:
        report["total_rsd_after_rejection_percent"] = total
    report["estimated_true_rsd_percent"] = math.sqrt(max(total ** 2 - placement ** 2, 0.0))
    return report, tables


# --------------------------------------------------------------------------
# AFM


def validate_afm(preset: AfmPreset, seed: int):
    cal = Calibration(preset.pixel_scale, "synthetic")
    scene = replace(preset.scene, seed=seed)
    hmap, manifest = generate_afm(scene, cal)
    lat = scene.lattice
    _, heights, summary = analyze_heightmap(hmap, manifest.pitch, manifest.origin, (lat.rows, lat.cols))
    truth = manifest.by_index()
    true_h = np.array([s.true_height for s in manifest.structures])
    errors = [m.height - truth[m.grid_index].true_height for m in heights]
    report = {
        "preset": preset.name,
        "description": preset.description,
        "seed": seed,
        "pixel_scale_nm": preset.pixel_scale,
        "target_mean_nm": scene.mean_height,
        "target_sd_nm": scene.height_sd,
        "expected_structures": len(manifest.structures),
        "true_mean_nm": float(true_h.mean()),
        "true_rsd_percent": rsd(true_h),
        "max_abs_height_error_nm": float(np.max(np.abs(errors))) if errors else None,
        "summary": summary,
    }
    table = [{
        "grid_i": m.grid_index[0], "grid_j": m.grid_index[1], "height_nm": m.height,
        "center_height_nm": m.center_height, "top_flatness_pp_nm": m.top_flatness_pp,
        "apparent_area_nm2": m.footprint_area,
    } for m in heights]
    return report, {"heights": table}


# --------------------------------------------------------------------------
# Paired SEM / AFM areas from one layout


def paired_lattice() -> LatticeSpec:
    return LatticeSpec(rows=4, cols=6, pitch=500.0, shape="disc", diameter=60.0,
                       area_jitter_rsd=0.05, position_jitter=2.0, nominal_height=160.0)


def paired_areas(seed: int, lattice: LatticeSpec | None = None, sem_scale: float = 1.0,
                 afm_scale: float = 1.5):
    """SEM and AFM area series for the same synthetic structures.

    Both scenes are built from one lattice and one seed, so each grid index
    carries the same footprint in both. Returns ``(keys, sem_areas,
    afm_areas, true_areas)`` aligned by grid index.
    """
    lattice = lattice or paired_lattice()
    sem_scene = replace(_realistic(lattice, sem_scale, 4.0), seed=seed)
    sem_cal = Calibration(sem_scale, "synthetic")
    image, manifest = generate_sem(sem_scene, sem_cal)
    found = associate_grid(measure(image, sem_cal), lattice.pitch, manifest.origin,
                           (lattice.rows, lattice.cols))
    sem = {m.grid_index: m.area for m in found if m.grid_index is not None and not m.conflict}

    afm_scene = AfmSceneSpec(lattice=lattice, mean_height=lattice.nominal_height, height_sd=0.0,
                             base_roughness_pp=1.5, tilt_x=2.0, seed=seed)
    afm_cal = Calibration(afm_scale, "synthetic")
    hmap, afm_manifest = generate_afm(afm_scene, afm_cal)
    leveled = level(hmap)
    windows = lattice_windows(hmap.heights.shape, afm_scale, lattice.pitch, afm_manifest.origin,
                              lattice.rows, lattice.cols)
    afm = area_above_threshold(leveled, 0.5 * lattice.nominal_height, windows)
    truth = manifest.by_index()
    keys = sorted(k for k in sem if afm.get(k, 0) > 0)
    return (keys, [sem[k] for k in keys], [afm[k] for k in keys],
            [truth[k].true_area for k in keys])


def validate_paired(seed: int):
    keys, sem, afm, true = paired_areas(seed)
    report = {
        "preset": "paired",
        "seed": seed,
        "n": len(keys),
        "pearson_sem_afm": pearson(sem, afm),
        "pearson_sem_true": pearson(sem, true),
        "pearson_afm_true": pearson(afm, true),
        "sem_rsd_percent": rsd(sem),
        "afm_rsd_percent": rsd(afm),
        "afm_area_convention": "apparent (no tip deconvolution)",
    }
    table = [{"grid_i": k[0], "grid_j": k[1], "sem_area_nm2": s, "afm_area_nm2": a,
              "true_area_nm2": t} for k, s, a, t in zip(keys, sem, afm, true)]
    return report, {"paired": table}


def validate(preset_name: str, seed: int, workers: int = 1):
    """Run one validation preset; returns ``(report, tables)``."""
    if workers < 1:
        raise InvalidArgumentError("workers must be at least 1")
    sem = sem_presets()
    if preset_name in sem:
        report, tables = validate_sem(sem[preset_name], seed, workers)
    elif preset_name == "afm":
        report, tables = validate_afm(afm_presets()["afm"], seed)
    elif preset_name == "paired":
        report, tables = validate_paired(seed)
    else:
        raise InvalidArgumentError(f"unknown preset {preset_name!r}; choose from {PRESET_NAMES}")
    report["tool_version"] = __version__
    return report, tables
