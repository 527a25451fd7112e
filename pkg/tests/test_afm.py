import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ndmetro.afm import (
    LeveledMap, analyze_heightmap, area_above_threshold, base_flatness,
    detect_structures, extract_heights, fit_plane, lattice_windows, level, level_plane,
)
from ndmetro.errors import FitError, InvalidArgumentError
from ndmetro.io import Calibration, HeightMap
from ndmetro.segment import perimeter_area_bound
from ndmetro.synth import AfmSceneSpec, LatticeSpec, generate_afm


def _plane_map(a, b, c, shape=(40, 50), scale=2.0):
    x = (np.arange(shape[1]) + 0.5) * scale
    y = (np.arange(shape[0]) + 0.5) * scale
    return HeightMap(a * x[None, :] + b * y[:, None] + c, scale)


def _single(height=68.2, **kw):
    lat = LatticeSpec(rows=1, cols=1, pitch=300, length=65, width=40)
    return generate_afm(AfmSceneSpec(lattice=lat, mean_height=height, **kw), Calibration(1.5))


def test_pure_tilt_levels_to_zero():
    hm = _plane_map(0.005, -0.002, 3.0)
    lev = level_plane(hm, np.ones(hm.heights.shape, bool))
    assert np.max(np.abs(lev.heights)) <= 1e-9
    assert lev.plane == pytest.approx((0.005, -0.002, 3.0), abs=1e-12)


@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(-100, 100))
def test_plane_fit_matches_lstsq_oracle(a, b, c):
    rng = np.random.default_rng(0)
    hm = _plane_map(a, b, c, (12, 15), 1.0)
    z = hm.heights + 0.01 * rng.standard_normal(hm.heights.shape)
    mask = rng.random(z.shape) < 0.5
    yy, xx = np.nonzero(mask)
    A = np.column_stack([xx + 0.5, yy + 0.5, np.ones(xx.size)])
    oracle = np.linalg.lstsq(A, z[mask], rcond=None)[0]
    assert fit_plane(z, mask, 1.0) == pytest.approx(tuple(oracle), abs=1e-8)


def test_tilted_pillar_base_flat_after_leveling():
    hmap, _ = _single(tilt_x=5.0, tilt_y=-3.0, base_roughness_pp=1.0, seed=2)
    lev = level(hmap)
    assert base_flatness(lev)["pp"] <= 1.0
    assert np.median(lev.heights[lev.base_mask]) == 0.0


def test_single_row_mask_is_degenerate():
    hm = _plane_map(0.01, 0.0, 0.0, shape=(5, 5))
    mask = np.zeros((5, 5), bool)
    mask[2] = True
    with pytest.raises(FitError):
        level_plane(hm, mask)


def test_small_mask_rejected():
    hm = _plane_map(0.0, 0.0, 0.0, shape=(20, 20))
    mask = np.zeros((20, 20), bool)
    mask[:3, :3] = True
    with pytest.raises(FitError):
        level_plane(hm, mask)


def test_noiseless_pillar_exact_height():
    hmap, _ = _single()
    lev = level(hmap)
    found = detect_structures(lev)
    assert len(found) == 1
    (m,) = extract_heights(lev, [((0, 0), found[0][1])])
    assert m.height == 68.2
    assert m.top_flatness_pp == 0.0


def test_spike_does_not_move_median_height():
    hmap, _ = _single()
    lev = level(hmap)
    mask = detect_structures(lev)[0][1]
    before = extract_heights(lev, [((0, 0), mask)])[0].height
    rr, cc = np.nonzero(mask)
    lev.heights[int(rr.mean()), int(cc.mean())] += 20
    after = extract_heights(lev, [((0, 0), mask)])[0]
    assert after.height == before
    assert after.top_flatness_pp == pytest.approx(20)


def test_empty_mask_skipped_with_warning(caplog):
    hmap, _ = _single()
    lev = level(hmap)
    with caplog.at_level(logging.WARNING):
        out = extract_heights(lev, [((0, 0), np.zeros(hmap.heights.shape, bool))])
    assert out == [] and "empty mask" in caplog.text


def _scene25(seed):
    lat = LatticeSpec(rows=5, cols=5, pitch=300, length=65, width=40)
    return generate_afm(AfmSceneSpec(lattice=lat, mean_height=68.2, height_sd=0.5,
                                     base_roughness_pp=1.5, tilt_x=5, tilt_y=2, seed=seed),
                        Calibration(1.5))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_twenty_five_pillar_recovery(seed):
    hmap, man = _scene25(seed)
    _, heights, summary = analyze_heightmap(hmap, man.pitch, man.origin, (5, 5))
    assert summary["n"] == 25
    truth = man.by_index()
    for m in heights:
        assert abs(m.height - truth[m.grid_index].true_height) < 0.2
    assert 0.4 <= summary["rsd_percent"] <= 1.1
    assert summary["base_flatness_pp_nm"] <= 2.0


def test_base_flatness_cases():
    hmap, _ = _single()
    assert base_flatness(level(hmap))["pp"] == 0.0
    rough, _ = _single(base_roughness_pp=1.5, seed=9)
    flat = base_flatness(level(rough))
    assert 1.0 <= flat["p1_p99"] <= 2.0


def test_unleveled_tilt_dominates_flatness():
    lat = LatticeSpec(rows=1, cols=3, pitch=600, length=65, width=40)
    hmap, _ = generate_afm(AfmSceneSpec(lattice=lat, tilt_x=5.0, base_roughness_pp=1.5, seed=4),
                           Calibration(3.0))
    leveled = level(hmap)
    raw = LeveledMap(hmap.heights, (0.0, 0.0, 0.0), leveled.base_mask, hmap.pixel_scale)
    # 5 nm/um over a 1.8 um field
    assert base_flatness(raw)["pp"] > 5.0 * 1.8 - 0.5
    assert base_flatness(leveled)["pp"] <= 1.5


def test_area_above_half_height():
    hmap, man = _single()
    lev = level(hmap)
    windows = lattice_windows(hmap.heights.shape, 1.5, man.pitch, man.origin, 1, 1)
    area = area_above_threshold(lev, 34.1, windows)[(0, 0)]
    assert abs(area - 2600) <= perimeter_area_bound("rect", (65, 40), 1.5)
    assert area_above_threshold(lev, 100.0, windows)[(0, 0)] == 0.0


@pytest.mark.parametrize("z", [0.0, -1.0, float("nan"), float("inf")])
def test_area_threshold_validation(z):
    hmap, man = _single()
    with pytest.raises(InvalidArgumentError):
        area_above_threshold(level(hmap), z, [])


def test_lattice_windows_tile_the_field():
    wins = lattice_windows((200, 300), 1.0, 100, (50, 50), 2, 3)
    assert len(wins) == 6
    total = sum((sl[0].stop - sl[0].start) * (sl[1].stop - sl[1].start) for _, sl in wins)
    assert total == 200 * 300
