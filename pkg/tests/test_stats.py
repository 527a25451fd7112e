import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import stats as sps

from ndmetro.errors import InvalidArgumentError, InvalidDatasetError, UndefinedCorrelationError
from ndmetro.io import Calibration
from ndmetro.segment import SegmentationConfig, measure
from ndmetro.stats import (
    analyze_areas, group_rows, modified_z_scores, normalize_dataset, pearson, reject_outliers,
    rsd, threshold_sweep,
)
from ndmetro.synth import LatticeSpec, SceneSpec, build_layout, derive_image_seed, generate_sem

ragged = st.lists(st.lists(st.floats(0.1, 1e4), min_size=1, max_size=8), min_size=1, max_size=8)


def test_hand_worked_normalization():
    ds = normalize_dataset([[4, 6], [8, 12]])
    np.testing.assert_array_equal(ds.SA, [5, 10])
    assert ds.SAA == 7.5
    np.testing.assert_allclose(ds.S_norm, [[6, 9], [6, 9]])


def test_identical_rows_identity():
    rows = [[3.0, 5.0, 7.0]] * 4
    ds = normalize_dataset(rows)
    for r in ds.S_norm:
        np.testing.assert_allclose(r, rows[0], rtol=1e-15)


@given(ragged)
def test_row_means_equal_global_average(rows):
    ds = normalize_dataset(rows)
    assert ds.SAA == pytest.approx(np.mean([np.mean(r) for r in rows]), rel=1e-12)
    for r in ds.S_norm:
        assert r.mean() == pytest.approx(ds.SAA, rel=1e-9)


@given(ragged, st.data())
def test_rescaling_a_row_leaves_normalized_values(rows, data):
    n = data.draw(st.integers(0, len(rows) - 1))
    c = data.draw(st.floats(0.01, 100))
    a = normalize_dataset(rows)
    scaled = [list(r) for r in rows]
    scaled[n] = [c * v for v in rows[n]]
    b = normalize_dataset(scaled)
    # per-image scale is removed up to the shift of the global average
    k = b.SAA / a.SAA
    for ra, rb in zip(a.S_norm, b.S_norm):
        np.testing.assert_allclose(rb, k * ra, rtol=1e-9)
    if sum(len(r) for r in rows) > 1:
        assert rsd(b.flat) == pytest.approx(rsd(a.flat), rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("rows", [[], [[1.0], []], [[1.0, -2.0]], [[0.0]], [[float("nan")]]])
def test_invalid_datasets(rows):
    with pytest.raises(InvalidDatasetError):
        normalize_dataset(rows)


def test_rsd_reference_heights():
    n = 24
    a = 0.5 * math.sqrt((n - 1) / n)
    series = [68.2 + a if k % 2 else 68.2 - a for k in range(n)]
    assert rsd(series) == pytest.approx(100 * 0.5 / 68.2)
    assert round(rsd(series), 2) == 0.73


def test_rsd_constant_and_errors():
    assert rsd([5.0] * 10) == 0.0
    with pytest.raises(InvalidArgumentError):
        rsd([1.0])
    with pytest.raises(InvalidArgumentError):
        rsd([-1.0, 1.0])


@given(st.lists(st.floats(1, 1e3), min_size=2, max_size=50))
def test_rsd_matches_scipy(values):
    x = np.array(values)
    assert rsd(x) == pytest.approx(100 * sps.variation(x, ddof=1), rel=1e-9, abs=1e-9)


def test_rsd_of_jittered_manifest():
    lat = LatticeSpec(rows=20, cols=22, pitch=100, area_jitter_rsd=0.05)
    assert 4.0 <= rsd([p.area for p in build_layout(lat, 99)]) <= 6.0


def test_gross_outlier_rejected():
    split = reject_outliers([1, 1, 1, 1, 10])
    assert split.rejected.tolist() == [10]
    assert split.mad_fallback


def test_constant_series_nothing_rejected():
    split = reject_outliers([2.0] * 7)
    assert split.rejected.size == 0 and not split.mad_fallback


def test_modified_z_oracle():
    x = np.array([2.0, 3.0, 3.5, 4.0, 20.0])
    med = 3.5
    mad = np.median(np.abs(x - med))
    z, fallback = modified_z_scores(x)
    np.testing.assert_allclose(z, 0.6745 * np.abs(x - med) / mad)
    assert not fallback
    assert reject_outliers(x).rejected.tolist() == [20.0]
    assert reject_outliers(x, threshold=1000).rejected.size == 0
    assert reject_outliers(x, "none").kept.size == 5


@pytest.mark.parametrize("args", [([1, 2], "mad_z"), ([1, 2, 3], "iqr"), ([1, 2, 3], "mad_z", 0)])
def test_reject_errors(args):
    with pytest.raises(InvalidArgumentError):
        reject_outliers(*args)


def test_pearson_perfect_lines():
    x = np.linspace(-3, 7, 13)
    assert pearson(x, 2 * x + 3) == 1.0
    assert pearson(x, -x) == -1.0


def test_pearson_independent_series():
    a = np.random.default_rng(101).normal(size=24)
    b = np.random.default_rng(202).normal(size=24)
    assert abs(pearson(a, b)) < 3 / math.sqrt(24)


def test_pearson_errors():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(InvalidArgumentError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(InvalidArgumentError):
        pearson([1], [1])


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=40))
def test_pearson_matches_scipy_and_bounded(pairs):
    x, y = map(np.array, zip(*pairs))
    assume(np.ptp(x) > 1e-6 and np.ptp(y) > 1e-6)
    r = pearson(x, y)
    assert -1 <= r <= 1
    assert r == pytest.approx(sps.pearsonr(x, y)[0], abs=1e-9)
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.floats(0.1, 10),
       st.floats(-50, 50))
def test_pearson_affine_exact(x, a, b):
    x = np.array(x)
    assume(np.ptp(x) > 1e-3)
    assert pearson(x, a * x + b) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, -a * x + b) == pytest.approx(-1.0, abs=1e-12)


def test_analyze_areas_rejection_lowers_rsd():
    rng = np.random.default_rng(5)
    rows = [list(1000 * (1 + 0.02 * rng.standard_normal(6))) for _ in range(20)]
    rows[3][2] *= 1.69
    rows[11][0] *= 1.69
    pre, _, _ = analyze_areas(rows)
    post, ds, masks = analyze_areas(rows, "mad_z")
    assert post.rejected_count == 2
    assert not masks[3][2] and not masks[11][0]
    assert post.rsd < pre.rsd
    assert post.to_json()["rsd_percent"] == post.rsd


def test_group_rows_orders_by_key():
    recs = [{"k": "b", "v": 1}, {"k": "a", "v": 2}, {"k": "b", "v": 3}]
    keys, rows, prov = group_rows(recs, lambda r: r["k"], lambda r: r["v"])
    assert keys == ["a", "b"] and rows == [[2], [1, 3]]
    assert prov[1][1] is recs[2]


def _images(noise, n=3):
    lat = LatticeSpec(rows=2, cols=3, pitch=200, length=65, width=40, area_jitter_rsd=0.03)
    cal = Calibration(1.0)
    out = []
    for k in range(n):
        img, _ = generate_sem(SceneSpec(lattice=lat, noise_sigma=noise,
                                        seed=derive_image_seed(8, k)), cal)
        out.append((img, cal))
    return out


def test_sweep_zero_offset_equals_baseline():
    images = _images(4.0)
    table, _ = threshold_sweep(images, SegmentationConfig(), [-3, 0, 3])
    base = [[m.area for m in measure(img, cal)] for img, cal in images]
    assert table[1]["rsd_percent"] == analyze_areas(base)[0].rsd
    assert table[1]["n"] == sum(len(r) for r in base)


def test_sweep_noise_free_is_flat():
    images = _images(0.0)
    table, _ = threshold_sweep(images, SegmentationConfig(), range(-5, 6))
    rsds = [t["rsd_percent"] for t in table]
    # the anti-aliasing band is a few percent of 2600 nm^2; RSD moves far less
    assert max(rsds) - min(rsds) < 0.5


def test_sweep_noisy_area_decreases_with_threshold():
    images = _images(4.0)
    table, _ = threshold_sweep(images, SegmentationConfig(), [-20, -10, 0, 10, 20])
    means = [t["mean_raw_area"] for t in table]
    assert all(a > b for a, b in zip(means, means[1:]))
