"""Command-line entry point.

Every subcommand is non-interactive and writes ``run.json`` (resolved
configuration plus tool version) into its output directory. Exit codes:
0 success, 1 data error, 2 usage error. A ``--config`` JSON file may supply
any flag by its option name (dashes or underscores); flags on the command
line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .afm import analyze_heightmap
from .design import (DIAMOND, REFERENCE_PILLARS, ATOMIC_MASS_UNIT_KG, MaterialConstants,
                     PillarSpec, check_design, plan_etch_stack)
from .errors import NdMetroError, ValidationError
from .io import (Calibration, calibration_path_for, dump_json, read_calibration, read_csv,
                 read_gray_image, read_heightmap, write_calibration, write_csv,
                 write_gray_image, write_heightmap, write_json, write_manifest)
from .segment import (MEASUREMENT_COLUMNS, SegmentationConfig, associate_grid, measure,
                      measurement_rows)
from .stats import analyze_areas, group_rows, pearson
from .synth import AfmSceneSpec, SceneSpec, derive_image_seed, generate_afm, generate_sem
from .workflows import PRESET_NAMES, afm_presets, sem_presets, validate


class UsageError(Exception):
    pass


def _positive(text):
    value = float(text)
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def _add_common(p, seeded=False):
    p.add_argument("--out-dir", default=".", help="output directory (created if missing)")
    p.add_argument("--config", help="JSON file supplying flag values; command-line flags win")
    if seeded:
        p.add_argument("--seed", type=int, help="random seed; generated and recorded if omitted")


def _add_segmentation(p):
    g = p.add_argument_group("segmentation")
    g.add_argument("--threshold-mode", choices=("otsu", "fixed", "tiled_otsu"), default="otsu")
    g.add_argument("--level", type=int, help="threshold level for --threshold-mode fixed")
    g.add_argument("--tile-px", type=int, default=256)
    g.add_argument("--level-offset", type=int, default=0)
    g.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    g.add_argument("--min-area", type=float, default=0.0, help="nm^2")
    g.add_argument("--max-area", type=float, default=math.inf, help="nm^2")
    g.add_argument("--border-policy", choices=("exclude_touching", "include"),
                   default="exclude_touching")
    g.add_argument("--fill-holes", action=argparse.BooleanOptionalAction, default=True)


def _add_lattice(p):
    g = p.add_argument_group("lattice association")
    g.add_argument("--pitch", type=_positive, help="lattice pitch in nm")
    g.add_argument("--origin-x", type=float, help="x of grid point (0, 0) in nm (default pitch/2)")
    g.add_argument("--origin-y", type=float, help="y of grid point (0, 0) in nm (default pitch/2)")
    g.add_argument("--lattice-rows", type=int)
    g.add_argument("--lattice-cols", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndmetro",
        description="Nanopillar metrology: design checks, synthetic SEM/AFM scenes, "
                    "segmentation, uniformity statistics and AFM heights.")
    parser.add_argument("--version", action="version", version=f"ndmetro {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("design", help="mass, atom count and design rules for a pillar")
    p.add_argument("--preset", choices=sorted(REFERENCE_PILLARS))
    p.add_argument("--length", type=_positive)
    p.add_argument("--width", type=_positive)
    p.add_argument("--height", type=_positive)
    p.add_argument("--label", default="")
    p.add_argument("--nv-depth-threshold", type=float, default=20.0)
    p.add_argument("--density", type=_positive, default=DIAMOND.density, help="kg/m^3")
    p.add_argument("--atomic-mass-u", type=_positive, default=12.011)
    _add_common(p)

    p = sub.add_parser("plan-etch", help="hard-mask and resist thickness for an etch depth")
    p.add_argument("--preset", choices=sorted(REFERENCE_PILLARS),
                   help="use the pillar height of a reference design as etch depth")
    p.add_argument("--depth", type=_positive, help="diamond etch depth in nm")
    p.add_argument("--s-diamond-mask", type=_positive, default=1.43)
    p.add_argument("--s-diamond-resist", type=_positive, default=0.32)
    p.add_argument("--s-resist2-mask", type=_positive, default=2.7)
    p.add_argument("--man-max", type=_positive, default=1000.0, help="ma-N thickness cap, nm")
    _add_common(p)

    p = sub.add_parser("generate-sem", help="render synthetic SEM images with manifests")
    p.add_argument("--scene", help="scene spec JSON")
    p.add_argument("--preset", choices=sorted(sem_presets()))
    p.add_argument("--pixel-scale", type=_positive, help="nm per pixel")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--name", default="sem")
    _add_common(p, seeded=True)

    p = sub.add_parser("generate-afm", help="render a synthetic AFM height map with manifest")
    p.add_argument("--scene", help="AFM scene spec JSON")
    p.add_argument("--preset", choices=sorted(afm_presets()))
    p.add_argument("--pixel-scale", type=_positive, help="nm per point")
    p.add_argument("--name", default="afm")
    _add_common(p, seeded=True)

    p = sub.add_parser("segment", help="measure structure areas in PGM images")
    p.add_argument("inputs", nargs="*", help="PGM images")
    p.add_argument("--pixel-scale", type=_positive,
                   help="nm per pixel; default: <image>.calib.json sidecar")
    p.add_argument("--workers", type=int, default=1)
    _add_segmentation(p)
    _add_lattice(p)
    _add_common(p)

    p = sub.add_parser("heights", help="pillar heights from an AFM height map")
    p.add_argument("input", nargs="?", help="height map CSV")
    p.add_argument("--z", type=_positive, help="area threshold in nm (default half median height)")
    p.add_argument("--figures", action="store_true")
    _add_lattice(p)
    _add_common(p)

    p = sub.add_parser("stats", help="normalize per-image areas and report uniformity")
    p.add_argument("inputs", nargs="*", help="per-image area CSVs from 'segment'")
    p.add_argument("--rejection", choices=("none", "mad_z"), default="none")
    p.add_argument("--mad-threshold", type=_positive, default=3.5)
    p.add_argument("--per-tile", action="store_true",
                   help="treat (image, tile) pairs as pseudo-images")
    _add_common(p)

    p = sub.add_parser("compare", help="Pearson correlation of two aligned series")
    p.add_argument("--x", dest="x_path", help="first series CSV")
    p.add_argument("--y", dest="y_path", help="second series CSV")
    p.add_argument("--x-column")
    p.add_argument("--y-column")
    _add_common(p)

    p = sub.add_parser("validate", help="oracle round-trip on a synthetic preset")
    p.add_argument("--preset", choices=PRESET_NAMES, default="nd1")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p, seeded=True)

    p = sub.add_parser("report", help="render figures and a summary table")
    p.add_argument("--normalized", help="normalized.csv from 'stats'")
    p.add_argument("--heights", dest="heights_csv", help="heights.csv from 'heights'")
    p.add_argument("--paired", help="CSV with sem_area_nm2 and afm_area_nm2 columns")
    _add_common(p)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _coerce(sp, action, key, value):
    """Run a config-file value through the same conversion as its flag."""
    if value is None:
        return None
    if action.nargs in ("*", "+", "?") and action.option_strings == []:
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list):
            sp.error(f"--config key {key!r} must be a list of paths")
        return [str(v) for v in value] if action.nargs != "?" else str(value[0])
    if isinstance(action, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
        if not isinstance(value, bool):
            sp.error(f"--config key {key!r} must be true or false")
        return value
    if isinstance(value, (dict, list, bool)):
        sp.error(f"--config key {key!r} has an invalid value {value!r}")
    if action.type is not None:
        try:
            value = action.type(str(value))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            sp.error(f"--config key {key!r}: {exc}")
    if action.choices is not None and value not in action.choices:
        sp.error(f"--config key {key!r} must be one of {sorted(action.choices)}")
    return value


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(2)
    if args.config:
        sp = _subparser(parser, args.command)
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            sp.error(f"cannot read --config: {exc}")
        if not isinstance(doc, dict):
            sp.error("--config must hold a JSON object")
        dests = {a.dest for a in sp._actions} - {"help", "config"}
        cfg = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = sorted(set(cfg) - dests)
        if unknown:
            sp.error(f"unknown keys in --config: {', '.join(unknown)}")
        actions = {a.dest: a for a in sp._actions}
        for k, v in cfg.items():
            cfg[k] = _coerce(sp, actions[k], k, v)
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        out[k] = v
    return out


def _write_run(out_dir: Path, args):
    write_json(out_dir / "run.json", {
        "tool": "ndmetro",
        "version": __version__,
        "subcommand": args.command,
        "config": _resolved(args),
    })


def _seed(args):
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _emit(obj):
    sys.stdout.write(dump_json(obj))


# --------------------------------------------------------------------------


def cmd_design(args, out):
    if args.preset:
        row = REFERENCE_PILLARS[args.preset]
        dims = dict(length=row.length, width=row.width, height=row.height, label=row.label)
    else:
        dims = dict(length=args.length, width=args.width, height=args.height, label=args.label)
        if None in (dims["length"], dims["width"], dims["height"]):
            raise UsageError("design needs --length, --width and --height (or --preset)")
    for k in ("length", "width", "height"):
        dims[k] = float(dims[k])
    spec = PillarSpec(**dims)
    mat = MaterialConstants(args.density, args.atomic_mass_u * ATOMIC_MASS_UNIT_KG)
    report = check_design(spec, args.nv_depth_threshold, mat)
    doc = report.to_json()
    doc["label"] = spec.label
    doc["dimensions_nm"] = {"length": spec.length, "width": spec.width, "height": spec.height}
    write_json(out / "design.json", doc)
    _emit(doc)


def cmd_plan_etch(args, out):
    depth = args.depth
    if depth is None and args.preset:
        depth = float(REFERENCE_PILLARS[args.preset].height)
    if depth is None:
        raise UsageError("plan-etch needs --depth or --preset")
    plan = plan_etch_stack(depth, args.s_diamond_mask, args.s_diamond_resist,
                           args.s_resist2_mask, args.man_max)
    doc = plan.to_json()
    write_json(out / "plan.json", doc)
    _emit(doc)


def _load_scene(args, cls, presets):
    if bool(args.scene) == bool(args.preset):
        raise UsageError("give exactly one of --scene or --preset")
    if args.preset:
        preset = presets[args.preset]
        return preset.scene, args.pixel_scale or preset.pixel_scale
    try:
        doc = json.loads(Path(args.scene).read_text(encoding="utf-8"))
        scene = cls.from_json(doc)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scene file is not valid JSON: {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"invalid scene spec: {exc}") from None
    if args.pixel_scale is None:
        raise UsageError("--pixel-scale is required with --scene")
    return scene, args.pixel_scale


def cmd_generate_sem(args, out):
    scene, scale = _load_scene(args, SceneSpec, sem_presets())
    seed = _seed(args)
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    cal = Calibration(scale, "synthetic")
    written = []
    for n in range(args.count):
        s = replace(scene, seed=derive_image_seed(seed, n))
        image, manifest = generate_sem(s, cal)
        stem = f"{args.name}_{n:03d}"
        path = out / f"{stem}.pgm"
        write_gray_image(image, path)
        write_calibration(cal, calibration_path_for(path))
        write_manifest(manifest, out / f"{stem}.manifest.json")
        written.append(str(path.name))
    write_json(out / "scene.json", scene.to_json())
    _emit({"images": written, "pixel_scale_nm": scale, "seed": seed})


def cmd_generate_afm(args, out):
    scene, scale = _load_scene(args, AfmSceneSpec, afm_presets())
    seed = _seed(args)
    cal = Calibration(scale, "synthetic")
    hmap, manifest = generate_afm(replace(scene, seed=seed), cal)
    write_heightmap(hmap, out / f"{args.name}.csv")
    write_manifest(manifest, out / f"{args.name}.manifest.json")
    write_json(out / "scene.json", scene.to_json())
    _emit({"heightmap": f"{args.name}.csv", "pixel_scale_nm": scale, "seed": seed})


def _seg_config(args) -> SegmentationConfig:
    return SegmentationConfig(
        threshold_mode=args.threshold_mode, level=args.level, tile_px=args.tile_px,
        level_offset=args.level_offset, connectivity=args.connectivity,
        min_area=args.min_area, max_area=float(args.max_area), border_policy=args.border_policy,
        fill_holes=args.fill_holes)


def _origin(args):
    half = args.pitch / 2.0
    return (half if args.origin_x is None else args.origin_x,
            half if args.origin_y is None else args.origin_y)


def _lattice_shape(args):
    if args.lattice_rows is None or args.lattice_cols is None:
        return None
    return args.lattice_rows, args.lattice_cols


def _segment_one(path, args, config):
    image = read_gray_image(path)
    if args.pixel_scale is not None:
        cal = Calibration(args.pixel_scale, "command line")
    else:
        sidecar = calibration_path_for(path)
        if not sidecar.exists():
            raise ValidationError(f"no --pixel-scale and no calibration sidecar {sidecar}")
        cal = read_calibration(sidecar)
    found = measure(image, cal, config)
    if args.pitch is not None:
        found = associate_grid(found, args.pitch, _origin(args), _lattice_shape(args))
    return found


def cmd_segment(args, out):
    if not args.inputs:
        raise UsageError("segment needs at least one input image")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    config = _seg_config(args)
    paths = [Path(p) for p in args.inputs]
    if args.workers == 1:
        results = [_segment_one(p, args, config) for p in paths]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(lambda p: _segment_one(p, args, config), paths))
    summary = []
    for path, found in zip(paths, results):
        image_id = path.stem
        write_csv(out / f"{image_id}.areas.csv", MEASUREMENT_COLUMNS,
                  measurement_rows(image_id, found))
        summary.append({"image_id": image_id, "structures": len(found),
                        "conflicts": sum(m.conflict for m in found)})
    _emit({"images": summary})


HEIGHT_COLUMNS = ("grid_i", "grid_j", "height_nm", "center_height_nm", "top_flatness_pp_nm",
                  "apparent_area_nm2")


def cmd_heights(args, out):
    if not args.input:
        raise UsageError("heights needs an input height map")
    if args.pitch is None:
        raise UsageError("heights needs --pitch")
    hmap = read_heightmap(args.input)
    leveled, heights, summary = analyze_heightmap(hmap, args.pitch, _origin(args),
                                                  _lattice_shape(args), args.z)
    write_csv(out / "heights.csv", HEIGHT_COLUMNS,
              [(m.grid_index[0], m.grid_index[1], m.height, m.center_height, m.top_flatness_pp,
                m.footprint_area) for m in heights])
    write_json(out / "heights_summary.json", summary)
    if args.figures:
        from . import plotting
        plotting.height_map(leveled.heights, hmap.pixel_scale, out / "heightmap.png")
        if heights:
            plotting.height_bars([f"{m.grid_index[0]},{m.grid_index[1]}" for m in heights],
                                 [m.height for m in heights], out / "heights.png")
    _emit(summary)


NORMALIZED_COLUMNS = ("image_id", "tile_id", "component_id", "grid_i", "grid_j", "area_nm2",
                      "normalized_area_nm2", "image_average_nm2")


def _read_area_records(paths):
    records = []
    for p in paths:
        for row in read_csv(p):
            missing = {"image_id", "component_id", "area_nm2"} - set(row)
            if missing:
                raise ValidationError(f"{p}: missing columns {sorted(missing)}")
            try:
                row["area_nm2"] = float(row["area_nm2"])
            except ValueError:
                raise ValidationError(f"{p}: non-numeric area {row['area_nm2']!r}") from None
            records.append(row)
    return records


def cmd_stats(args, out):
    if not args.inputs:
        raise UsageError("stats needs at least one area CSV")
    records = _read_area_records(args.inputs)
    if args.per_tile:
        key = lambda r: (r["image_id"], r.get("tile_id") or "")  # noqa: E731
    else:
        key = lambda r: r["image_id"]  # noqa: E731
    keys, rows, prov = group_rows(records, key, lambda r: r["area_nm2"])
    report, dataset, masks = analyze_areas(rows, args.rejection, args.mad_threshold, prov)
    if args.per_tile:
        report.notes.append("tiles treated as pseudo-images for in-image normalization "
                            "(interpretation of double normalization)")
    doc = report.to_json()
    doc["SAA_nm2"] = dataset.SAA
    doc["images"] = len(dataset.S)
    doc["image_averages_nm2"] = [float(v) for v in dataset.SA]
    write_json(out / "uniformity.json", doc)
    table = []
    for row_prov, vals, sa in zip(dataset.provenance, dataset.S_norm, dataset.SA):
        for rec, v in zip(row_prov, vals):
            table.append((rec["image_id"], rec.get("tile_id") or None, rec["component_id"],
                          rec.get("grid_i") or None, rec.get("grid_j") or None, rec["area_nm2"],
                          float(v), float(sa)))
    write_csv(out / "normalized.csv", NORMALIZED_COLUMNS, table)
    _emit(doc)


def _series(path, column, prefer):
    rows = read_csv(path)
    if not rows:
        raise ValidationError(f"{path}: no rows")
    if column is None:
        column = next((c for c in prefer if c in rows[0]), None)
        if column is None:
            raise ValidationError(f"{path}: none of the columns {prefer} present")
    if column not in rows[0]:
        raise ValidationError(f"{path}: no column {column!r}")
    keyed = "grid_i" in rows[0] and "grid_j" in rows[0]
    out = []
    for r in rows:
        try:
            value = float(r[column])
        except ValueError:
            raise ValidationError(f"{path}: non-numeric {column} {r[column]!r}") from None
        key = (r.get("image_id", ""), r["grid_i"], r["grid_j"]) if keyed else None
        if keyed and (r["grid_i"] == "" or r["grid_j"] == ""):
            continue
        out.append((key, value))
    return out, keyed, column


def _keyed(path, series, with_image):
    out = {}
    for key, value in series:
        k = key if with_image else key[1:]
        if k in out:
            raise ValidationError(f"{path}: duplicate grid index {k}; cannot align")
        out[k] = value
    return out


def cmd_compare(args, out):
    """Join on (image_id, grid_i, grid_j) when the files share image ids, on
    (grid_i, grid_j) otherwise, and by row order when either lacks grid
    columns."""
    if not (args.x_path and args.y_path):
        raise UsageError("compare needs --x and --y")
    prefer = ("normalized_area_nm2", "area_nm2", "apparent_area_nm2", "sem_area_nm2")
    xs, xk, xc = _series(args.x_path, args.x_column, prefer)
    ys, yk, yc = _series(args.y_path, args.y_column,
                         ("apparent_area_nm2", "afm_area_nm2") + prefer)
    if xk and yk:
        shared = {k[0] for k, _ in xs} & {k[0] for k, _ in ys}
        with_image = bool(shared - {""})
        xd = _keyed(args.x_path, xs, with_image)
        yd = _keyed(args.y_path, ys, with_image)
        keys = sorted(set(xd) & set(yd))
        x = [xd[k] for k in keys]
        y = [yd[k] for k in keys]
        aligned = "image and grid index" if with_image else "grid index"
    else:
        if len(xs) != len(ys):
            raise ValidationError(f"series lengths differ: {len(xs)} vs {len(ys)}")
        x = [v for _, v in xs]
        y = [v for _, v in ys]
        aligned = "row order"
    doc = {"n": len(x), "r": pearson(x, y), "x_column": xc, "y_column": yc,
           "aligned_by": aligned}
    write_json(out / "compare.json", doc)
    _emit(doc)


def cmd_validate(args, out):
    seed = _seed(args)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    report, tables = validate(args.preset, seed, args.workers)
    write_json(out / "validation.json", report)
    for name, rows in tables.items():
        if rows:
            cols = list(rows[0])
            write_csv(out / f"{name}.csv", cols, [[r[c] for c in cols] for r in rows])
    _emit({k: v for k, v in report.items() if k != "runs"})


def cmd_report(args, out):
    from . import plotting

    if not (args.normalized or args.heights_csv or args.paired):
        raise UsageError("report needs --normalized, --heights or --paired")
    summary = []
    figures = []
    if args.normalized:
        rows = read_csv(args.normalized)
        vals = np.array([float(r["normalized_area_nm2"]) for r in rows])
        per_image = {}
        for r in rows:
            per_image.setdefault(r["image_id"], float(r["image_average_nm2"]))
        sa = np.array(list(per_image.values()))
        plotting.area_histogram(vals, out / "area_histogram.png")
        plotting.image_averages(sa, float(sa.mean()), out / "image_averages.png")
        figures += ["area_histogram.png", "image_averages.png"]
        summary += [("areas", "n", vals.size), ("areas", "mean_nm2", float(vals.mean())),
                    ("areas", "rsd_percent", float(100 * vals.std(ddof=1) / vals.mean())),
                    ("areas", "images", sa.size)]
    if args.heights_csv:
        rows = read_csv(args.heights_csv)
        h = np.array([float(r["height_nm"]) for r in rows])
        plotting.height_bars([f"{r['grid_i']},{r['grid_j']}" for r in rows], h,
                             out / "heights.png")
        figures.append("heights.png")
        summary += [("heights", "n", h.size), ("heights", "mean_nm", float(h.mean())),
                    ("heights", "rsd_percent", float(100 * h.std(ddof=1) / h.mean()))]
    if args.paired:
        rows = read_csv(args.paired)
        x = [float(r["sem_area_nm2"]) for r in rows]
        y = [float(r["afm_area_nm2"]) for r in rows]
        r = pearson(x, y)
        plotting.series_scatter(x, y, out / "paired_scatter.png", r)
        figures.append("paired_scatter.png")
        summary += [("paired", "n", len(x)), ("paired", "pearson_r", r)]
    write_csv(out / "report_summary.csv", ("section", "quantity", "value"), summary)
    _emit({"figures": figures, "summary": "report_summary.csv"})


HANDLERS = {
    "design": cmd_design,
    "plan-etch": cmd_plan_etch,
    "generate-sem": cmd_generate_sem,
    "generate-afm": cmd_generate_afm,
    "segment": cmd_segment,
    "heights": cmd_heights,
    "stats": cmd_stats,
    "compare": cmd_compare,
    "validate": cmd_validate,
    "report": cmd_report,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](args, out)
        _write_run(out, args)
    except UsageError as exc:
        print(f"ndmetro {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (NdMetroError, OSError) as exc:
        print(f"ndmetro {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
