"""Readers and writers for the native file formats.

* Grayscale rasters: binary PGM (``P5``), maxval 255 or 65535, big-endian.
* Height maps: UTF-8 CSV matrix preceded by ``# pixel_scale_nm=<v>``.
* Calibration sidecars, scene manifests and reports: JSON.

Every writer goes through :func:`atomic_write_bytes`, so a reader never sees
a half-written file.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import InvalidImageError, ParseError, ValidationError

PGM_MAGIC = b"P5"
_WHITESPACE = b" \t\n\r\v\f"


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj))


# --------------------------------------------------------------------------
# Grayscale images


@dataclass
class GrayImage:
    pixels: np.ndarray
    depth: int = 8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        validate_image(self)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def maxval(self) -> int:
        return (1 << self.depth) - 1


def validate_image(image: GrayImage) -> None:
    if image.depth not in (8, 16):
        raise InvalidImageError(f"unsupported depth {image.depth}")
    px = image.pixels
    if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
        raise InvalidImageError(f"image must be a non-empty 2-D grid, got shape {px.shape}")
    if not np.issubdtype(px.dtype, np.integer):
        raise InvalidImageError(f"pixels must be integers, got {px.dtype}")
    if px.min() < 0 or px.max() > (1 << image.depth) - 1:
        raise InvalidImageError(f"pixel values outside [0, {(1 << image.depth) - 1}]")


def encode_pgm(image: GrayImage) -> bytes:
    validate_image(image)
    dtype = ">u1" if image.depth == 8 else ">u2"
    header = b"P5\n%d %d\n%d\n" % (image.width, image.height, image.maxval)
    return header + np.ascontiguousarray(image.pixels, dtype=dtype).tobytes()


def write_gray_image(image: GrayImage, path) -> None:
    atomic_write_bytes(path, encode_pgm(image))


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c in _WHITESPACE and c:
            pos += 1
        elif c == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise ParseError("malformed header", "unterminated comment")
            pos = end + 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("malformed header", "header ended early")
    return buf[start:pos], pos


def decode_pgm(buf: bytes) -> GrayImage:
    if not buf:
        raise ParseError("empty input")
    if buf[:2] != PGM_MAGIC:
        raise ParseError("malformed header", f"bad magic {buf[:2]!r}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        if not tok.isdigit():
            raise ParseError("malformed header", f"non-numeric field {tok[:16]!r}")
        fields.append(int(tok))
    if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
        raise ParseError("malformed header", "missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ParseError("malformed header", f"invalid size {width}x{height}")
    if maxval == 255:
        depth, dtype = 8, ">u1"
    elif maxval == 65535:
        depth, dtype = 16, ">u2"
    else:
        raise ParseError("unsupported depth", f"maxval {maxval}")
    nbytes = width * height * (depth // 8)
    payload = buf[pos:]
    if len(payload) < nbytes:
        raise ParseError("truncated payload", f"expected {nbytes} bytes, found {len(payload)}")
    if len(payload) > nbytes:
        raise ParseError("trailing data", f"{len(payload) - nbytes} extra bytes")
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    native = np.uint8 if depth == 8 else np.uint16
    return GrayImage(pixels.astype(native), depth)


def read_gray_image(path) -> GrayImage:
    return decode_pgm(Path(path).read_bytes())


# --------------------------------------------------------------------------
# Calibration


@dataclass(frozen=True)
class Calibration:
    pixel_scale: float
    source: str = ""

    def __post_init__(self):
        if not (isinstance(self.pixel_scale, (int, float)) and math.isfinite(self.pixel_scale)
                and self.pixel_scale > 0):
            raise ValidationError(f"pixel_scale must be positive, got {self.pixel_scale!r}")

    @property
    def pixel_area(self) -> float:
        return self.pixel_scale * self.pixel_scale


_CALIBRATION_SCHEMA = {
    "type": "object",
    "properties": {
        "pixel_scale_nm": {"type": "number", "exclusiveMinimum": 0},
        "source": {"type": "string"},
    },
    "required": ["pixel_scale_nm"],
    "additionalProperties": False,
}


def calibration_path_for(image_path) -> Path:
    return Path(f"{image_path}.calib.json")


def write_calibration(cal: Calibration, path) -> None:
    write_json(path, {"pixel_scale_nm": cal.pixel_scale, "source": cal.source})


def read_calibration(path) -> Calibration:
    doc = _load_json(path)
    _validate(doc, _CALIBRATION_SCHEMA, "calibration")
    return Calibration(float(doc["pixel_scale_nm"]), doc.get("source", ""))


# --------------------------------------------------------------------------
# Height maps


@dataclass
class HeightMap:
    heights: np.ndarray
    pixel_scale: float

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2 or 0 in self.heights.shape:
            raise ValidationError(f"height map must be a non-empty 2-D grid, got {self.heights.shape}")
        if not np.all(np.isfinite(self.heights)):
            raise ValidationError("height map contains non-finite values")
        if not (math.isfinite(self.pixel_scale) and self.pixel_scale > 0):
            raise ValidationError(f"pixel_scale must be positive, got {self.pixel_scale!r}")

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]


def encode_heightmap(hmap: HeightMap) -> str:
    out = _io.StringIO()
    out.write(f"# pixel_scale_nm={hmap.pixel_scale!r}\n")
    for row in hmap.heights.tolist():
        out.write(",".join(repr(v) for v in row))
        out.write("\n")
    return out.getvalue()


def write_heightmap(hmap: HeightMap, path) -> None:
    atomic_write_text(path, encode_heightmap(hmap))


def decode_heightmap(text: str) -> HeightMap:
    if not text:
        raise ParseError("empty input")
    lines = text.splitlines()
    head = lines[0].strip()
    prefix = "# pixel_scale_nm="
    if not head.startswith(prefix):
        raise ParseError("malformed header", "expected '# pixel_scale_nm=<v>'")
    try:
        scale = float(head[len(prefix):])
    except ValueError:
        raise ParseError("malformed header", f"bad pixel scale {head[len(prefix):]!r}") from None
    if not (math.isfinite(scale) and scale > 0):
        raise ParseError("malformed header", f"pixel scale must be positive, got {scale}")
    rows = []
    ncols = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if ncols is None:
            ncols = len(cells)
        elif len(cells) != ncols:
            raise ParseError("ragged rows", f"line {lineno} has {len(cells)} cells, expected {ncols}")
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise ParseError("non-numeric cell", f"line {lineno}") from None
        rows.append(row)
    if not rows:
        raise ParseError("empty input", "no data rows")
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-numeric cell", "non-finite height value")
    return HeightMap(arr, scale)


def read_heightmap(path) -> HeightMap:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("malformed header", "not UTF-8 text") from None
    return decode_heightmap(text)


# --------------------------------------------------------------------------
# Scene manifests

MANIFEST_VERSION = 1

_XY = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

MANIFEST_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "kind": {"enum": ["sem", "afm"]},
        "pixel_scale_nm": {"type": "number", "exclusiveMinimum": 0},
        "pitch_nm": {"type": "number", "exclusiveMinimum": 0},
        "origin_nm": _XY,
        "seed": {"type": "integer", "minimum": 0},
        "image_width_px": {"type": "integer", "minimum": 1},
        "image_height_px": {"type": "integer", "minimum": 1},
        "structures": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "grid_index": {"type": "array", "items": {"type": "integer"},
                                   "minItems": 2, "maxItems": 2},
                    "centroid_nm": _XY,
                    "true_area_nm2": {"type": "number", "exclusiveMinimum": 0},
                    "true_height_nm": {"type": "number", "exclusiveMinimum": 0},
                    "shape": {"enum": ["rect", "disc"]},
                    "is_outlier": {"type": "boolean"},
                },
                "required": ["grid_index", "centroid_nm", "true_area_nm2",
                             "true_height_nm", "shape", "is_outlier"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["version", "kind", "pixel_scale_nm", "pitch_nm", "origin_nm", "seed",
                 "image_width_px", "image_height_px", "structures"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class StructureRecord:
    grid_index: tuple[int, int]
    centroid: tuple[float, float]
    true_area: float
    true_height: float
    shape: str
    is_outlier: bool = False


@dataclass
class SceneManifest:
    pixel_scale: float
    pitch: float
    seed: int
    image_width: int
    image_height: int
    origin: tuple[float, float] = (0.0, 0.0)
    kind: str = "sem"
    structures: list[StructureRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for s in self.structures:
            key = tuple(s.grid_index)
            if key in seen:
                raise ValidationError(f"duplicate grid index {key}")
            seen.add(key)
            if not (s.true_area > 0 and s.true_height > 0):
                raise ValidationError(f"structure {key}: area and height must be positive")

    def by_index(self) -> dict:
        return {tuple(s.grid_index): s for s in self.structures}

    def to_json(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "kind": self.kind,
            "pixel_scale_nm": self.pixel_scale,
            "pitch_nm": self.pitch,
            "origin_nm": list(self.origin),
            "seed": int(self.seed),
            "image_width_px": self.image_width,
            "image_height_px": self.image_height,
            "structures": [
                {
                    "grid_index": [int(s.grid_index[0]), int(s.grid_index[1])],
                    "centroid_nm": [float(s.centroid[0]), float(s.centroid[1])],
                    "true_area_nm2": float(s.true_area),
                    "true_height_nm": float(s.true_height),
                    "shape": s.shape,
                    "is_outlier": bool(s.is_outlier),
                }
                for s in self.structures
            ],
        }

    @classmethod
    def from_json(cls, doc) -> SceneManifest:
        _validate(doc, MANIFEST_SCHEMA, "manifest")
        structures = [
            StructureRecord(tuple(s["grid_index"]), tuple(s["centroid_nm"]), s["true_area_nm2"],
                            s["true_height_nm"], s["shape"], s["is_outlier"])
            for s in doc["structures"]
        ]
        return cls(doc["pixel_scale_nm"], doc["pitch_nm"], doc["seed"], doc["image_width_px"],
                   doc["image_height_px"], tuple(doc["origin_nm"]), doc["kind"], structures)


def write_manifest(manifest: SceneManifest, path) -> None:
    doc = manifest.to_json()
    _validate(doc, MANIFEST_SCHEMA, "manifest")
    write_json(path, doc)


def read_manifest(path) -> SceneManifest:
    return SceneManifest.from_json(_load_json(path))


def _load_json(path):
    raw = Path(path).read_bytes()
    if not raw:
        raise ParseError("empty input")
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError("malformed json", str(exc)) from None


def _validate(doc, schema, what):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"invalid {what} at {where}: {exc.message}") from None


# --------------------------------------------------------------------------
# CSV tables


def write_csv(path, columns, rows) -> None:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    atomic_write_text(path, out.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
