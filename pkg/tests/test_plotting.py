import numpy as np

from ndmetro import plotting


def _png(path):
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    return data


def test_figures_render_to_files(tmp_path):
    rng = np.random.default_rng(0)
    vals = 2600 + 100 * rng.standard_normal(200)
    plotting.area_histogram(vals, tmp_path / "h.png")
    plotting.image_averages(vals[:20], vals[:20].mean(), tmp_path / "a.png")
    plotting.series_scatter(vals[:24], vals[:24] * 1.1, tmp_path / "s.png", r=1.0)
    plotting.height_map(rng.random((30, 40)), 1.5, tmp_path / "m.png")
    plotting.height_bars(["0,0", "0,1", "1,0"], [68.1, 68.4, 67.9], tmp_path / "b.png")
    for name in ("h", "a", "s", "m", "b"):
        _png(tmp_path / f"{name}.png")


def test_figures_are_reproducible(tmp_path):
    vals = np.linspace(1, 2, 50)
    plotting.area_histogram(vals, tmp_path / "1.png")
    plotting.area_histogram(vals, tmp_path / "2.png")
    assert _png(tmp_path / "1.png") == _png(tmp_path / "2.png")
