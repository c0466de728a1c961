"""Viewing-cone geolocation: pixel column -> bearing -> range -> WGS84 point.

The pixel-to-angle model is a rectilinear pinhole (tangent), not linear
interpolation across the cone.  Range comes from a ground-plane model when
the camera height is known and the detection sits measurably below the
horizon; otherwise a configured fixed distance is used, and each produced
point records which method placed it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .annotations import CategoryMapping, Detection
from .config import PipelineConfig
from .errors import PoleUndefined
from .exif import CameraFix, GeoPoint, normalize_heading

METHOD_GROUND_PLANE = "ground-plane"
METHOD_FIXED = "fixed-distance"

# below this depression angle the ground-plane model explodes; fall back
MIN_DEPRESSION_DEG = 0.5
DISTANCE_MIN_M = 0.5
DISTANCE_MAX_M = 100.0

# bearings are meaningless at the poles; reject fixes beyond this latitude
MAX_USABLE_LAT_DEG = 89.9


@dataclass(frozen=True)
class GeoDetection:
    """A detection lifted to a WGS84 point along the camera's viewing ray."""

    image_id: object
    annotation_id: object
    target_class: str
    score: float
    bearing_deg: float
    distance_m: float
    method: str
    position: GeoPoint


def wrap_angle_deg(deg: float) -> float:
    """Fold any angle into [-180, 180)."""
    a = (deg + 180.0) % 360.0 - 180.0
    return -180.0 if a >= 180.0 else a


def pixel_bearing(fix: CameraFix, u: float) -> float:
    """Bearing of the ray through horizontal pixel coordinate u.

    u = 0 is the left edge of the cone (heading - hfov/2), u = W the right
    edge; the mapping between them follows the tangent model.
    """
    w = fix.image_w_px
    if not 0.0 <= u <= w:
        raise ValueError(f"pixel coordinate {u} outside [0, {w}]")
    half = math.radians(fix.hfov_deg / 2.0)
    offset = math.degrees(math.atan((2.0 * u / w - 1.0) * math.tan(half)))
    return normalize_heading(fix.heading_deg + offset)


def half_vfov_deg(fix: CameraFix) -> float:
    """Vertical half-FOV implied by the horizontal FOV and the aspect ratio."""
    half_h = math.radians(fix.hfov_deg / 2.0)
    return math.degrees(math.atan(math.tan(half_h) * fix.image_h_px / fix.image_w_px))


def estimate_distance(fix: CameraFix, det: Detection, cfg: PipelineConfig) -> tuple:
    """Range to the detection: (distance_m, method).

    Ground-plane: the bbox bottom edge is assumed to touch flat ground, so
    distance = camera height / tan(depression angle to that row).  Degenerate
    geometry (no camera height, or the bottom edge at/above the horizon)
    falls back to the configured fixed distance; this never fails.
    """
    if fix.camera_height_m is None:
        return cfg.default_distance_m, METHOD_FIXED
    v_bottom = det.bbox[1] + det.bbox[3]
    h = fix.image_h_px
    half_v = math.radians(half_vfov_deg(fix))
    depression = fix.pitch_deg + math.degrees(math.atan((2.0 * v_bottom / h - 1.0) * math.tan(half_v)))
    if depression <= MIN_DEPRESSION_DEG:
        return cfg.default_distance_m, METHOD_FIXED
    distance = fix.camera_height_m / math.tan(math.radians(depression))
    return min(max(distance, DISTANCE_MIN_M), DISTANCE_MAX_M), METHOD_GROUND_PLANE


def geodesic_destination(origin: GeoPoint, bearing_deg: float, distance_m: float,
                         radius_m: float) -> GeoPoint:
    """Spherical-Earth direct problem: the point distance_m along bearing_deg."""
    if distance_m < 0:
        raise ValueError("distance must be >= 0")
    if abs(origin.lat_deg) > MAX_USABLE_LAT_DEG:
        raise PoleUndefined(f"latitude {origin.lat_deg} too close to a pole for a bearing")
    if distance_m == 0.0:
        return origin
    lat1 = math.radians(origin.lat_deg)
    lon1 = math.radians(origin.lon_deg)
    theta = math.radians(bearing_deg)
    delta = distance_m / radius_m
    sin_lat2 = math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(theta)
    lat2 = math.asin(min(1.0, max(-1.0, sin_lat2)))
    lon2 = lon1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * sin_lat2,
    )
    lon2_deg = math.degrees(lon2)
    if not -180.0 <= lon2_deg <= 180.0:
        lon2_deg = (lon2_deg + 180.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(lat2), lon2_deg)


def locate_detection(fix: CameraFix, det: Detection, mapping: CategoryMapping,
                     cfg: PipelineConfig) -> GeoDetection:
    """Place one detection: bbox center column -> bearing, range model -> point."""
    u = det.bbox[0] + det.bbox[2] / 2.0
    bearing = pixel_bearing(fix, u)
    distance, method = estimate_distance(fix, det, cfg)
    position = geodesic_destination(fix.position, bearing, distance, cfg.earth_radius_m)
    return GeoDetection(
        image_id=det.image_id,
        annotation_id=det.annotation_id,
        target_class=mapping.target_for(det.category_id),
        score=det.score,
        bearing_deg=bearing,
        distance_m=distance,
        method=method,
        position=position,
    )
