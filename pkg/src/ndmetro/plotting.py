"""Report figures. Everything renders off-screen to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
}

# PNG text chunks otherwise embed the matplotlib version
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def area_histogram(values, path, title="Normalized areas", unit="nm$^2$", bins=30):
    values = np.asarray(values, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.hist(values, bins=bins, color="0.55", edgecolor="0.2", linewidth=0.5)
        mean = values.mean()
        ax.axvline(mean, color="C3", linestyle="--", label=f"mean {mean:.1f}")
        if values.size > 1:
            sd = values.std(ddof=1)
            ax.axvspan(mean - sd, mean + sd, color="C3", alpha=0.12,
                       label=f"RSD {100 * sd / mean:.2f} %")
        ax.set_xlabel(f"area ({unit})")
        ax.set_ylabel("count")
        ax.set_title(title)
        ax.legend(loc="upper right")
        _save(fig, path)


def image_averages(SA, SAA, path, title="Per-image average area"):
    SA = np.asarray(SA, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(np.arange(SA.size), SA, "o", color="C0", ms=4, label="image average")
        ax.axhline(SAA, color="C3", linestyle="--", label="global average")
        ax.set_xlabel("image")
        ax.set_ylabel("area (nm$^2$)")
        ax.set_title(title)
        ax.legend(loc="best")
        _save(fig, path)


def series_scatter(x, y, path, r=None, xlabel="SEM area (nm$^2$)", ylabel="AFM area (nm$^2$)"):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.8, 3.6))
        ax.plot(x, y, "o", color="C0", ms=4)
        if x.size >= 2 and np.ptp(x) > 0:
            k, b = np.polyfit(x, y, 1)
            xs = np.linspace(x.min(), x.max(), 2)
            ax.plot(xs, k * xs + b, color="0.3", linewidth=0.8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if r is not None:
            ax.set_title(f"r = {r:.3f} (n = {x.size})")
        _save(fig, path)


def height_map(heights, pixel_scale, path, title="Leveled height map"):
    heights = np.asarray(heights, dtype=float)
    extent = (0, heights.shape[1] * pixel_scale, heights.shape[0] * pixel_scale, 0)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.4, 3.6))
        im = ax.imshow(heights, cmap="afmhot", extent=extent, interpolation="nearest")
        fig.colorbar(im, ax=ax, label="height (nm)")
        ax.set_xlabel("x (nm)")
        ax.set_ylabel("y (nm)")
        ax.set_title(title)
        _save(fig, path)


def height_bars(labels, heights, path, title="Pillar heights"):
    heights = np.asarray(heights, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.bar(np.arange(heights.size), heights, color="0.55")
        ax.axhline(heights.mean(), color="C3", linestyle="--")
        lo, hi = heights.min(), heights.max()
        pad = max(hi - lo, 0.5)
        ax.set_ylim(lo - pad, hi + pad)
        ax.set_xticks(np.arange(heights.size))
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
        ax.set_ylabel("height (nm)")
        ax.set_title(title)
        _save(fig, path)
