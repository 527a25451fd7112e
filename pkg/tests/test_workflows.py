from dataclasses import replace

import pytest

from ndmetro.errors import InvalidArgumentError
from ndmetro.stats import pearson
from ndmetro.workflows import (
    afm_presets, paired_areas, run_sem_dataset, sem_presets, summarize_dataset, validate,
)


def test_presets_match_their_descriptions():
    nd1 = sem_presets()["nd1"]
    lat = nd1.scene.lattice
    assert nd1.n_images * lat.count == 440
    assert (lat.length, lat.width, nd1.pixel_scale) == (65, 40, 0.505)
    large = sem_presets()["large"]
    assert large.n_images * large.scene.lattice.count == 60
    mt = sem_presets()["master-target"]
    assert mt.n_images == 33 and mt.scene.lattice.count == 6
    assert mt.scene.lattice.shape == "disc" and mt.scene.lattice.diameter == 60
    assert afm_presets()["afm"].scene.lattice.count == 25


def test_five_percent_jitter_total_rsd():
    nd1 = sem_presets()["nd1"]
    scene = replace(nd1.scene, lattice=replace(nd1.scene.lattice, area_jitter_rsd=0.05))
    results = run_sem_dataset(scene, nd1.pixel_scale, nd1.n_images, seed=3)
    summary = summarize_dataset(results)
    assert summary["detected_structures"] == 440
    assert 4.5 <= summary["rsd_percent"] <= 7.0


def test_large_preset_validation():
    report, tables = validate("large", seed=2)
    assert report["runs"]["total"]["detected_structures"] == 60
    assert 0.7 <= report["total_rsd_percent"] <= 1.5
    assert report["method_floor_rsd_percent"] < 0.5
    assert set(tables) == {"floor", "placement", "total"}


def test_master_target_rejection():
    report, _ = validate("master-target", seed=4)
    run = report["runs"]["total"]
    assert run["post_rejection_rsd_percent"] < run["pre_rejection_rsd_percent"]
    assert run["rejection_precision"] >= 0.9 and run["rejection_recall"] >= 0.9
    assert report["total_rsd_after_rejection_percent"] == run["post_rejection_rsd_percent"]


def test_afm_validation():
    report, tables = validate("afm", seed=5)
    assert abs(report["summary"]["mean_nm"] - report["true_mean_nm"]) < 0.1
    assert report["max_abs_height_error_nm"] < 0.2
    assert len(tables["heights"]) == 25


def test_paired_series_correlate():
    keys, sem, afm, true = paired_areas(seed=6)
    assert len(keys) == 24
    assert pearson(sem, afm) >= 0.8
    assert pearson(sem, true) >= 0.9


def test_worker_count_does_not_change_results():
    nd1 = sem_presets()["large"]
    a = run_sem_dataset(nd1.scene, nd1.pixel_scale, 4, seed=1, workers=1)
    b = run_sem_dataset(nd1.scene, nd1.pixel_scale, 4, seed=1, workers=3)
    assert [(r.sha256, r.rows) for r in a] == [(r.sha256, r.rows) for r in b]


def test_unknown_preset():
    with pytest.raises(InvalidArgumentError):
        validate("nope", 1)
    with pytest.raises(InvalidArgumentError):
        validate("large", 1, workers=0)
