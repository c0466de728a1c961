"""Synthetic scenes with known litter positions: the geometry oracle.

Plants ground-truth points inside camera viewing cones, projects them to
pixel coordinates with an inverse-geodesic (haversine + initial bearing)
formulation that shares no code with the forward placement path, and
measures how closely the pipeline recovers the planted positions.  Scenes
are fully determined by their seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from random import Random
from .annotations import CocoDocument, consolidate, dump_coco, load_coco, load_sidecar
from .config import PipelineConfig
from .errors import OutOfCone, OutOfRange
from .exif import CameraFix, GeoPoint
from .geolocate import (
    DISTANCE_MAX_M,
    DISTANCE_MIN_M,
    GeoDetection,
    METHOD_FIXED,
    METHOD_GROUND_PLANE,
    half_vfov_deg,
    locate_detection,
    wrap_angle_deg,
)

SCENE_FORMAT = "litter-scene"
SCENE_VERSION = 1

# synthetic detector output uses one constant confidence
SYNTH_SCORE = 0.9

_SYNTH_CLASSES = ("Bottle", "Can", "Carton", "Cup")


def inverse_geodesic(a: GeoPoint, b: GeoPoint, radius_m: float) -> tuple:
    """(distance_m, initial_bearing_deg) from a to b on a sphere.

    Haversine distance plus the atan2 initial-bearing formula: deliberately
    a different formulation from the forward destination code it checks.
    """
    lat1 = math.radians(a.lat_deg)
    lat2 = math.radians(b.lat_deg)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    distance = 2.0 * radius_m * math.asin(min(1.0, math.sqrt(h)))
    bearing = math.degrees(math.atan2(
        math.sin(dlon) * math.cos(lat2),
        math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon),
    ))
    return distance, bearing % 360.0


def project_to_pixel(fix: CameraFix, point: GeoPoint, cfg: PipelineConfig) -> tuple:
    """(u, v_bottom) where the pipeline would have to see the point's base.

    Raises OutOfRange outside the supported distance bounds, OutOfCone when
    the point falls outside the view frustum (horizontally or vertically).
    Without a camera height there is no ground-plane row to invert, so
    v_bottom lands at a fixed below-horizon row that fixed-distance scenes
    never read.
    """
    distance, bearing = inverse_geodesic(fix.position, point, cfg.earth_radius_m)
    if not DISTANCE_MIN_M <= distance <= DISTANCE_MAX_M:
        raise OutOfRange(f"point at {distance:.2f} m outside [{DISTANCE_MIN_M}, {DISTANCE_MAX_M}] m")
    offset = wrap_angle_deg(bearing - fix.heading_deg)
    half_h = fix.hfov_deg / 2.0
    if abs(offset) > half_h:
        raise OutOfCone(f"offset {offset:.2f} deg outside half-FOV {half_h:.2f} deg")
    w = fix.image_w_px
    u = w / 2.0 * (1.0 + math.tan(math.radians(offset)) / math.tan(math.radians(half_h)))

    h = fix.image_h_px
    if fix.camera_height_m is None:
        return u, 0.75 * h
    alpha = math.degrees(math.atan(fix.camera_height_m / distance))
    half_v = half_vfov_deg(fix)
    v_bottom = h / 2.0 * (1.0 + math.tan(math.radians(alpha - fix.pitch_deg))
                          / math.tan(math.radians(half_v)))
    if not 0.0 <= v_bottom <= h:
        raise OutOfCone(f"ground row {v_bottom:.1f} outside image height {h}")
    return u, v_bottom


@dataclass(frozen=True)
class PlantedPoint:
    annotation_id: int
    image_id: int
    point: GeoPoint
    target_class: str


@dataclass(frozen=True)
class SyntheticScene:
    seed: int
    fixes: tuple  # CameraFix per synthetic image
    planted: tuple  # PlantedPoint ground truth
    detections: CocoDocument
    expected: tuple  # GeoDetections the pipeline should reproduce


def generate_scene(seed: int, n_points: int, area, cfg: PipelineConfig, *,
                   min_distance_m: float = 4.0, max_distance_m: float = 30.0,
                   image_size: tuple = (4032, 3024), pixel_jitter_px: float = 0.0,
                   heading_error_deg: float = 0.0) -> SyntheticScene:
    """Deterministically plant n_points litter positions inside camera cones.

    ``area`` is (min_lat, min_lon, max_lat, max_lon).  One camera per point;
    candidate points are resampled until they survive projection, so every
    planted point satisfies the cone and range invariants by construction.

    ``pixel_jitter_px`` and ``heading_error_deg`` perturb the detections and
    the reported headings (uniformly, seeded) to separate model error from
    noise sensitivity; both default to off and the noiseless draw sequence
    is unchanged when they are zero.
    """
    if n_points < 0:
        raise ValueError("n_points must be >= 0")
    rng = Random(seed)
    width, height = image_size
    min_lat, min_lon, max_lat, max_lon = area

    fixes = []
    planted = []
    images = []
    anns = []
    radius = cfg.earth_radius_m
    for i in range(n_points):
        image_id = i + 1
        while True:
            cam = GeoPoint(rng.uniform(min_lat, max_lat), rng.uniform(min_lon, max_lon))
            heading = rng.uniform(0.0, 360.0)
            fix = CameraFix(
                position=cam,
                heading_deg=heading,
                heading_source="true-north",
                hfov_deg=cfg.hfov_deg,
                image_w_px=width,
                image_h_px=height,
                pitch_deg=cfg.pitch_deg,
                camera_height_m=cfg.camera_height_m,
                image_id=image_id,
            )
            d = rng.uniform(min_distance_m, max_distance_m)
            ray = heading + rng.uniform(-0.45, 0.45) * cfg.hfov_deg
            # planar offsets are only a sampling device; projection recomputes
            # the true bearing/distance of wherever the point actually lands
            dx = d * math.sin(math.radians(ray))
            dy = d * math.cos(math.radians(ray))
            point = GeoPoint(
                cam.lat_deg + math.degrees(dy / radius),
                cam.lon_deg + math.degrees(dx / (radius * math.cos(math.radians(cam.lat_deg)))),
            )
            try:
                u, v_bottom = project_to_pixel(fix, point, cfg)
            except (OutOfCone, OutOfRange):
                continue
            if pixel_jitter_px:
                u = min(max(u + rng.uniform(-pixel_jitter_px, pixel_jitter_px), 0.0), width)
                v_bottom = min(max(v_bottom + rng.uniform(-pixel_jitter_px, pixel_jitter_px),
                                   0.0), float(height))
            box_w = min(rng.uniform(40.0, 160.0), 2.0 * u, 2.0 * (width - u))
            box_h = min(rng.uniform(40.0, 160.0), v_bottom)
            if box_w < 2.0 or box_h < 2.0:
                continue
            break
        if heading_error_deg:
            fix = replace(fix, heading_deg=fix.heading_deg
                          + rng.uniform(-heading_error_deg, heading_error_deg))
        target_class = _SYNTH_CLASSES[rng.randrange(len(_SYNTH_CLASSES))]
        fixes.append(fix)
        planted.append(PlantedPoint(annotation_id=image_id, image_id=image_id,
                                    point=point, target_class=target_class))
        images.append({"id": image_id, "file_name": f"synth-{image_id:04d}.jpg",
                       "width": width, "height": height})
        anns.append({
            "id": image_id,
            "image_id": image_id,
            "category_id": _SYNTH_CLASSES.index(target_class) + 1,
            "bbox": [u - box_w / 2.0, v_bottom - box_h, box_w, box_h],
            "score": SYNTH_SCORE,
        })

    doc = load_coco(json.dumps({
        "images": images,
        "annotations": anns,
        "categories": [
            {"id": i + 1, "name": name, "supercategory": name}
            for i, name in enumerate(_SYNTH_CLASSES)
        ],
    }))
    expected = _expected_from_planted(fixes, planted, cfg)
    return SyntheticScene(seed=seed, fixes=tuple(fixes), planted=tuple(planted),
                          detections=doc, expected=expected)


def _expected_from_planted(fixes, planted, cfg):
    by_image = {f.image_id: f for f in fixes}
    expected = []
    for p in planted:
        fix = by_image[p.image_id]
        distance, bearing = inverse_geodesic(fix.position, p.point, cfg.earth_radius_m)
        expected.append(GeoDetection(
            image_id=p.image_id,
            annotation_id=p.annotation_id,
            target_class=p.target_class,
            score=SYNTH_SCORE,
            bearing_deg=bearing,
            distance_m=distance,
            method=METHOD_GROUND_PLANE if fix.camera_height_m is not None else METHOD_FIXED,
            position=p.point,
        ))
    return tuple(expected)


def scene_to_json(scene: SyntheticScene) -> str:
    """One JSON document: sidecar + COCO detections + planted truth.

    The "sidecar" and "detections" values are exactly the formats the main
    pipeline ingests, so they can be split out and fed to it unchanged.
    """
    sidecar = [
        {
            "image_id": f.image_id,
            "lat": f.position.lat_deg,
            "lon": f.position.lon_deg,
            "heading_deg": f.heading_deg,
            "width": f.image_w_px,
            "height": f.image_h_px,
        }
        for f in scene.fixes
    ]
    detections = json.loads(dump_coco(scene.detections))
    planted = [
        {
            "annotation_id": p.annotation_id,
            "image_id": p.image_id,
            "lat": p.point.lat_deg,
            "lon": p.point.lon_deg,
            "class": p.target_class,
        }
        for p in scene.planted
    ]
    doc = {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "seed": scene.seed,
        "sidecar": sidecar,
        "detections": detections,
        "planted": planted,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def scene_from_json(data, cfg: PipelineConfig) -> SyntheticScene:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    fixes = tuple(load_sidecar(json.dumps(doc["sidecar"]), cfg))
    detections = load_coco(json.dumps(doc["detections"]))
    planted = tuple(
        PlantedPoint(
            annotation_id=p["annotation_id"],
            image_id=p["image_id"],
            point=GeoPoint(p["lat"], p["lon"]),
            target_class=p["class"],
        )
        for p in doc["planted"]
    )
    expected = _expected_from_planted(fixes, planted, cfg)
    return SyntheticScene(seed=int(doc.get("seed", 0)), fixes=fixes, planted=planted,
                          detections=detections, expected=expected)


@dataclass(frozen=True)
class RoundtripStats:
    count: int
    mean_m: float
    max_m: float
    p95_m: float

    def to_dict(self) -> dict:
        return {"count": self.count, "mean_m": self.mean_m,
                "max_m": self.max_m, "p95_m": self.p95_m}


def roundtrip_error(scene: SyntheticScene, cfg: PipelineConfig) -> RoundtripStats:
    """Run the real pipeline on the scene and measure recovery error.

    Error per detection is the inverse-geodesic distance between the planted
    point and where locate_detection put it.
    """
    errors = list(roundtrip_errors(scene, cfg))
    if not errors:
        return RoundtripStats(0, 0.0, 0.0, 0.0)
    ranked = sorted(errors)
    p95_index = max(0, math.ceil(0.95 * len(ranked)) - 1)
    return RoundtripStats(
        count=len(errors),
        mean_m=sum(errors) / len(errors),
        max_m=ranked[-1],
        p95_m=ranked[p95_index],
    )


def roundtrip_errors(scene: SyntheticScene, cfg: PipelineConfig):
    """Per-detection placement error in meters, in planted order."""
    mapping = consolidate(scene.detections.taxonomy)
    fixes_by_image = {f.image_id: f for f in scene.fixes}
    truth_by_ann = {p.annotation_id: p.point for p in scene.planted}
    for det in scene.detections.detections:
        fix = fixes_by_image[det.image_id]
        located = locate_detection(fix, det, mapping, cfg)
        error, _ = inverse_geodesic(truth_by_ann[det.annotation_id], located.position,
                                    cfg.earth_radius_m)
        yield error
