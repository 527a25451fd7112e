"""Area normalization across image sets and uniformity statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, InvalidDatasetError, UndefinedCorrelationError

MAD_Z_SCALE = 0.6745
MEAN_AD_Z_SCALE = 1.253314


@dataclass
class AreaDataset:
    """Raw areas ``S[n][m]`` with their per-image and global averages.

    ``SA[n]`` is the mean of image ``n``; ``SAA`` is the mean of ``SA``;
    ``S_norm[n][m] = SAA / SA[n] * S[n][m]``. Rows may differ in length.
    """

    S: list[np.ndarray]
    SA: np.ndarray
    SAA: float
    S_norm: list[np.ndarray]
    provenance: list[list] | None = None

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.S_norm) if self.S_norm else np.array([])

    @property
    def flat_raw(self) -> np.ndarray:
        return np.concatenate(self.S) if self.S else np.array([])


def normalize_dataset(S, provenance=None) -> AreaDataset:
    rows = [np.asarray(r, dtype=float).ravel() for r in S]
    if not rows:
        raise InvalidDatasetError("dataset has no images")
    for n, r in enumerate(rows):
        if r.size == 0:
            raise InvalidDatasetError(f"image {n} has no areas")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise InvalidDatasetError(f"image {n} contains non-positive or non-finite areas")
    if provenance is not None and [len(p) for p in provenance] != [r.size for r in rows]:
        raise InvalidDatasetError("provenance shape does not match the area matrix")
    SA = np.array([r.mean() for r in rows])
    SAA = float(SA.mean())
    S_norm = [r * (SAA / sa) for r, sa in zip(rows, SA)]
    return AreaDataset(rows, SA, SAA, S_norm, provenance)


def rsd(values) -> float:
    """Relative standard deviation in percent (sample standard deviation)."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise InvalidArgumentError("rsd needs at least two values")
    mean = x.mean()
    if not mean > 0:
        raise InvalidArgumentError("rsd needs a positive mean")
    return float(100.0 * x.std(ddof=1) / mean)


@dataclass
class OutlierSplit:
    kept: np.ndarray
    rejected: np.ndarray
    kept_mask: np.ndarray
    method: str
    threshold: float | None = None
    mad_fallback: bool = False


def modified_z_scores(values) -> tuple[np.ndarray, bool]:
    """Robust z-scores ``0.6745 |x - median| / MAD``.

    When the MAD is zero the scale falls back to the mean absolute deviation
    about the median, ``z = |x - median| / (1.253314 MeanAD)``; the second
    return value reports whether that fallback was used. Constant data score
    zero everywhere.
    """
    x = np.asarray(values, dtype=float)
    med = np.median(x)
    dev = np.abs(x - med)
    mad = float(np.median(dev))
    if mad > 0:
        return MAD_Z_SCALE * dev / mad, False
    mean_ad = float(dev.mean())
    if mean_ad == 0:
        return np.zeros_like(x), False
    return dev / (MEAN_AD_Z_SCALE * mean_ad), True


def reject_outliers(values, method: str = "mad_z", threshold: float = 3.5) -> OutlierSplit:
    """Split values into kept and rejected sets.

    ``mad_z`` rejects points whose modified z-score exceeds ``threshold``.
    ``mad_fallback`` is set when the MAD was zero for non-constant data and
    the mean-absolute-deviation scale was used instead.
    """
    x = np.asarray(values, dtype=float).ravel()
    if method == "none":
        mask = np.ones(x.size, dtype=bool)
        return OutlierSplit(x, x[:0], mask, method)
    if method != "mad_z":
        raise InvalidArgumentError(f"unknown rejection method {method!r}")
    if x.size < 3:
        raise InvalidArgumentError("mad_z rejection needs at least three values")
    if not threshold > 0:
        raise InvalidArgumentError("threshold must be positive")
    z, fallback = modified_z_scores(x)
    mask = z <= threshold
    return OutlierSplit(x[mask], x[~mask], mask, method, threshold, fallback)


def pearson(x, y) -> float:
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.size != b.size:
        raise InvalidArgumentError("series must have equal length")
    if a.size < 2:
        raise InvalidArgumentError("pearson needs at least two pairs")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = float(np.dot(da, da)), float(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    r = float(np.dot(da, db)) / math.sqrt(sa * sb)
    return max(-1.0, min(1.0, r))


@dataclass
class UniformityReport:
    n: int
    mean: float
    sd: float
    rsd: float
    rejected_count: int = 0
    rejection_method: str = "none"
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "rsd_percent": self.rsd,
            "rejected_count": self.rejected_count,
            "rejection_method": self.rejection_method,
            "notes": list(self.notes),
        }


def uniformity(values, rejected_count=0, rejection_method="none", notes=()) -> UniformityReport:
    x = np.asarray(values, dtype=float).ravel()
    value = rsd(x)
    return UniformityReport(int(x.size), float(x.mean()), float(x.std(ddof=1)), value,
                            rejected_count, rejection_method, list(notes))


def median_normalized(rows) -> list[np.ndarray]:
    """Each row divided by its own median; a robust stand-in for SA_n used to
    screen outliers before the mean-based normalization."""
    return [np.asarray(r, dtype=float) / np.median(r) for r in rows]


def reject_dataset_outliers(rows, method="mad_z", threshold=3.5):
    """Outlier screening across a ragged area matrix.

    Scores are computed on median-normalized areas pooled over all images, so
    a per-image threshold offset cannot masquerade as an outlier and an
    outlier cannot drag its image's mean before it is removed. Returns the
    per-row keep masks and the pooled split.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    pooled = np.concatenate(median_normalized(rows))
    split = reject_outliers(pooled, method, threshold)
    masks, start = [], 0
    for r in rows:
        masks.append(split.kept_mask[start:start + r.size])
        start += r.size
    return masks, split


def analyze_areas(rows, method="none", threshold=3.5, provenance=None):
    """Normalize, optionally screen outliers, and summarize uniformity.

    Returns ``(report, dataset, keep_masks)``; ``dataset`` holds only kept
    areas. Images left empty by rejection are dropped.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    notes = []
    if method == "none":
        masks = [np.ones(r.size, dtype=bool) for r in rows]
        rejected = 0
    else:
        masks, split = reject_dataset_outliers(rows, method, threshold)
        rejected = int(split.rejected.size)
        if split.mad_fallback:
            notes.append("MAD is zero for non-constant data; mean absolute deviation used as scale")
    kept_rows, kept_prov = [], []
    for n, (r, m) in enumerate(zip(rows, masks)):
        if m.any():
            kept_rows.append(r[m])
            if provenance is not None:
                kept_prov.append([p for p, keep in zip(provenance[n], m) if keep])
    dataset = normalize_dataset(kept_rows, kept_prov if provenance is not None else None)
    report = uniformity(dataset.flat, rejected, method, notes)
    return report, dataset, masks


def threshold_sweep(images, config, offsets):
    """Re-measure an image set at threshold offsets around the automatic level.

    ``images`` is a sequence of ``(GrayImage, Calibration)`` pairs. Returns
    ``(table, sensitivity)`` where each table row holds offset, structure
    count, SAA, RSD of normalized areas and mean raw area, and
    ``sensitivity`` is the least-squares slope of RSD against offset.
    """
    from .segment import measure

    table = []
    for off in offsets:
        cfg = replace(config, level_offset=int(off))
        rows = []
        for image, cal in images:
            areas = [m.area for m in measure(image, cal, cfg)]
            if areas:
                rows.append(areas)
        ds = normalize_dataset(rows)
        flat = ds.flat
        table.append({
            "offset": int(off),
            "n": int(flat.size),
            "SAA": ds.SAA,
            "rsd_percent": rsd(flat) if flat.size >= 2 else float("nan"),
            "mean_raw_area": float(ds.flat_raw.mean()),
        })
    sensitivity = float("nan")
    if len(table) >= 2:
        xs = np.array([t["offset"] for t in table], dtype=float)
        ys = np.array([t["rsd_percent"] for t in table])
        if np.ptp(xs) > 0 and np.all(np.isfinite(ys)):
            sensitivity = float(np.polyfit(xs, ys, 1)[0])
    return table, sensitivity


def group_rows(records, key_fn, value_fn):
    """Group flat records into an ordered ragged matrix keyed by ``key_fn``."""
    groups = {}
    prov = {}
    for rec in records:
        k = key_fn(rec)
        groups.setdefault(k, []).append(value_fn(rec))
        prov.setdefault(k, []).append(rec)
    keys = sorted(groups, key=lambda k: tuple(str(p) for p in (k if isinstance(k, tuple) else (k,))))
    return keys, [groups[k] for k in keys], [prov[k] for k in keys]
