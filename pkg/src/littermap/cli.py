"""Command-line frontend: extract -> locate -> evaluate -> store -> map.

Exit codes: 0 success, 1 data error, 2 partial failure, 64 usage.  Set
LITTERMAP_NOW (ISO 8601) to pin the run timestamp for reproducible runs;
everything else is already deterministic given the inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import uuid
from datetime import datetime, timezone
from pathlib import Path

from . import annotations, evaluate, exif, mapping, store, synth
from .config import PipelineConfig
from .errors import DuplicateRun, ExifError, LitterMapError
from .geolocate import METHOD_FIXED, locate_detection

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64

NOW_ENV = "LITTERMAP_NOW"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _now() -> datetime:
    injected = os.environ.get(NOW_ENV)
    if injected:
        stamp = datetime.fromisoformat(injected.replace("Z", "+00:00"))
        return stamp if stamp.tzinfo else stamp.replace(tzinfo=timezone.utc)
    return datetime.now(timezone.utc)


def _run_id(now: datetime) -> str:
    # deterministic when the timestamp is injected, unique otherwise
    base = "run-" + now.strftime("%Y%m%dT%H%M%S%fZ")
    if os.environ.get(NOW_ENV):
        return base
    return base + "-" + uuid.uuid4().hex[:8]


def _load_config(path, **overrides) -> PipelineConfig:
    cfg = PipelineConfig.from_file(path) if path else PipelineConfig()
    return cfg.updated(**overrides) if overrides else cfg


def _fix_to_dict(fix: exif.CameraFix) -> dict:
    return {
        "image_id": fix.image_id,
        "lat": fix.position.lat_deg,
        "lon": fix.position.lon_deg,
        "heading_deg": fix.heading_deg,
        "heading_source": fix.heading_source,
        "hfov_deg": fix.hfov_deg,
        "pitch_deg": fix.pitch_deg,
        "camera_height_m": fix.camera_height_m,
        "image_w_px": fix.image_w_px,
        "image_h_px": fix.image_h_px,
        "captured_at": fix.captured_at.isoformat() if fix.captured_at else None,
    }


def cmd_exif(args) -> int:
    cfg = _load_config(args.config)
    failures = 0
    for path in args.images:
        try:
            raw = exif.parse_jpeg_exif(Path(path).read_bytes())
            fix = exif.extract_camera_fix(raw, cfg, image_id=Path(path).name)
        except (OSError, ExifError) as e:
            print(f"{path}: {e}", file=sys.stderr)
            failures += 1
            continue
        print(json.dumps(_fix_to_dict(fix)))
    return EXIT_PARTIAL if failures else EXIT_OK


def _jpeg_files(directory: Path):
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in (".jpg", ".jpeg"))


def cmd_locate(args) -> int:
    cfg = _load_config(args.config)
    now = _now()
    run_id = _run_id(now)
    warnings = []

    doc = annotations.load_coco(Path(args.detections).read_bytes())
    file_to_image = {im.file_name: im.id for im in doc.images}

    fixes = {}
    images_read = 0
    if args.images:
        for path in _jpeg_files(Path(args.images)):
            images_read += 1
            try:
                raw = exif.parse_jpeg_exif(path.read_bytes())
                image_id = file_to_image.get(path.name, path.name)
                fix = exif.extract_camera_fix(raw, cfg, image_id=image_id)
            except ExifError as e:
                if args.strict:
                    print(f"{path}: {e}", file=sys.stderr)
                    return EXIT_DATA_ERROR
                warnings.append(f"{path.name}: {e}")
                continue
            fixes[fix.image_id] = fix
    if args.sidecar:
        for fix in annotations.load_sidecar(Path(args.sidecar).read_bytes(), cfg):
            images_read += 1
            fixes[fix.image_id] = fix

    for fix in fixes.values():
        if fix.heading_source == "magnetic":
            warnings.append(f"image {fix.image_id}: magnetic heading used without declination correction")

    mapping_ = annotations.consolidate(doc.taxonomy)
    kept = annotations.filter_by_confidence(doc.detections, cfg.confidence_threshold)

    located = []
    skipped_no_fix = 0
    for det in kept:
        fix = fixes.get(det.image_id)
        if fix is None:
            skipped_no_fix += 1
            continue
        located.append(locate_detection(fix, det, mapping_, cfg))
    if skipped_no_fix:
        warnings.append(f"{skipped_no_fix} detections skipped: no camera fix for their image")
    fallbacks = sum(1 for g in located if g.method == METHOD_FIXED)
    if fallbacks:
        warnings.append(f"{fallbacks} detections placed at the fixed fallback distance")

    located.sort(key=lambda g: (str(g.image_id), str(g.annotation_id)))
    geojson = mapping.to_geojson(located)
    out_path = Path(args.out)
    out_path.write_text(mapping.geojson_dumps(geojson), encoding="utf-8")

    stored = 0
    if args.store:
        capture_times = {f.image_id: f.captured_at for f in fixes.values() if f.captured_at}
        store.append_run(args.store, located, run_id=run_id, run_time=now,
                         capture_times=capture_times)
        stored = len(located)

    manifest = {
        "run_id": run_id,
        "config": cfg.to_dict(),
        "inputs": {
            "images": args.images,
            "detections": args.detections,
            "sidecar": args.sidecar,
            "out": args.out,
            "store": args.store,
        },
        "counts": {
            "images_read": images_read,
            "fixes_extracted": len(fixes),
            "detections_loaded": len(doc.detections),
            "kept_after_threshold": len(kept),
            "located": len(located),
            "stored": stored,
        },
        "warnings": warnings,
    }
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    overrides = {}
    if args.threshold is not None:
        overrides["confidence_threshold"] = args.threshold
    if args.iou is not None:
        overrides["iou_threshold"] = args.iou
    cfg = _load_config(args.config, **overrides)
    pred_doc = annotations.load_coco(Path(args.pred).read_bytes())
    truth_doc = annotations.load_coco(Path(args.truth).read_bytes())
    dataset = args.dataset or Path(args.pred).stem
    report = evaluate.evaluate_report(pred_doc, truth_doc, cfg, dataset=dataset)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _parse_when(raw: str, end_of_day: bool) -> datetime:
    stamp = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    if end_of_day and len(raw) == 10:  # bare date: include the whole day
        stamp = stamp.replace(hour=23, minute=59, second=59, microsecond=999999)
    return stamp


def cmd_map(args) -> int:
    cfg = _load_config(args.config)
    if args.geo:
        doc = json.loads(Path(args.geo).read_text(encoding="utf-8"))
        points = mapping.from_geojson(doc)
    else:
        start = _parse_when(args.time_from, False) if args.time_from else None
        end = _parse_when(args.time_to, True) if args.time_to else None
        points = []
        for record in store.read_records(args.store):
            if start is not None and record.recorded_at < start:
                continue
            if end is not None and record.recorded_at > end:
                continue
            points.append(mapping.GeoDetection(
                image_id=record.image_id,
                annotation_id=record.annotation_id,
                target_class=record.target_class,
                score=record.score,
                bearing_deg=record.bearing_deg,
                distance_m=record.distance_m,
                method=record.method,
                position=exif.GeoPoint(record.lat, record.lon),
            ))

    if args.grid:
        if points:
            south = min(p.position.lat_deg for p in points)
            west = min(p.position.lon_deg for p in points)
            origin = exif.GeoPoint(south, west)
        else:
            origin = exif.GeoPoint(0.0, 0.0)
        cells = mapping.grid_bin(points, args.grid, origin, cfg.earth_radius_m)
        doc_out = mapping.grid_to_geojson(cells)
        title = "Litter density grid"
    else:
        doc_out = mapping.to_geojson(points)
        title = "Litter detections"

    out_path = Path(args.out)
    if out_path.suffix.lower() in (".html", ".htm"):
        out_path.write_text(mapping.render_html(doc_out, title), encoding="utf-8")
    else:
        out_path.write_text(mapping.geojson_dumps(doc_out), encoding="utf-8")
    print(json.dumps({"out": args.out, "features": len(doc_out["features"])}))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    area = (38.55, -121.43, 38.57, -121.41)  # default synthetic neighborhood
    scene = synth.generate_scene(args.seed, args.points, area, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene_json = synth.scene_to_json(scene)
    (out_dir / "scene.json").write_text(scene_json, encoding="utf-8")
    bundle = json.loads(scene_json)
    (out_dir / "sidecar.json").write_text(
        json.dumps(bundle["sidecar"], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "detections.json").write_text(
        json.dumps(bundle["detections"], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps({"seed": args.seed, "points": args.points, "out": str(out_dir)}))
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    cfg = _load_config(args.config)
    scene = synth.scene_from_json(Path(args.scene).read_bytes(), cfg)
    stats = synth.roundtrip_error(scene, cfg)
    print(json.dumps(stats.to_dict(), indent=2))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="littermap",
                     description="Geolocate litter detections and map them over time.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exif", help="print camera fixes extracted from JPEG files")
    p.add_argument("images", nargs="+", help="JPEG paths")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_exif)

    p = sub.add_parser("locate", help="geolocate detections and write GeoJSON")
    p.add_argument("--images", help="directory of geotagged JPEGs")
    p.add_argument("--detections", required=True, help="COCO-style detections JSON")
    p.add_argument("--sidecar", help="sidecar camera metadata JSON")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True, help="output GeoJSON path")
    p.add_argument("--store", help="survey store to append this run to")
    p.add_argument("--strict", action="store_true", help="fail on any EXIF error")
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("evaluate", help="precision/recall of predictions vs ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="confidence threshold (default 0.30)")
    p.add_argument("--iou", type=float, default=None,
                   help="IoU match threshold (default 0.5)")
    p.add_argument("--dataset", help="dataset label for the report")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("map", help="render points or a density grid as HTML/GeoJSON")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--geo", help="point GeoJSON produced by locate")
    source.add_argument("--store", help="survey store to read")
    p.add_argument("--from", dest="time_from", help="ISO date/time lower bound (store mode)")
    p.add_argument("--to", dest="time_to", help="ISO date/time upper bound (store mode)")
    p.add_argument("--grid", type=float, help="bin into cells of this size in meters")
    p.add_argument("--out", required=True, help=".html or .geojson output path")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("synth", help="generate a synthetic scene with known positions")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("roundtrip", help="placement error statistics on a synthetic scene")
    p.add_argument("--scene", required=True, help="scene.json from the synth command")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_roundtrip)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except DuplicateRun as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except LitterMapError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
