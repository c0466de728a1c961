"""Append-only survey store: geolocated detections across pipeline runs.

One newline-delimited JSON file: a header line with the format version,
then one record per line.  Appends rewrite through a temp file and rename,
so the previous content is always a byte prefix of the new content and a
crash never leaves a half-written store.  Appends take an exclusive
advisory lock; readers see a consistent snapshot of whatever was fully
written when they opened the file.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import DuplicateRun, StoreCorrupt
from .geolocate import GeoDetection
from .mapping import cell_index

try:
    import fcntl
except ImportError:  # non-POSIX: single-process use only
    fcntl = None

STORE_FORMAT = "litter-survey"
STORE_VERSION = 1

TIME_FROM_CAPTURE = "capture"
TIME_FROM_RUN = "run"

_RECORD_FIELDS = ("run_id", "recorded_at", "image_id", "annotation_id", "class",
                  "score", "lat", "lon", "bearing_deg", "distance_m", "method",
                  "time_source")


@dataclass(frozen=True)
class SurveyRecord:
    run_id: str
    recorded_at: datetime
    time_source: str  # capture | run
    image_id: object
    annotation_id: object
    target_class: str
    score: float
    lat: float
    lon: float
    bearing_deg: float
    distance_m: float
    method: str

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "recorded_at": self.recorded_at.isoformat(),
            "image_id": self.image_id,
            "annotation_id": self.annotation_id,
            "class": self.target_class,
            "score": self.score,
            "lat": self.lat,
            "lon": self.lon,
            "bearing_deg": self.bearing_deg,
            "distance_m": self.distance_m,
            "method": self.method,
            "time_source": self.time_source,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SurveyRecord":
        missing = [k for k in _RECORD_FIELDS if k not in obj]
        if missing:
            raise StoreCorrupt(f"record missing fields {missing}")
        recorded = datetime.fromisoformat(str(obj["recorded_at"]).replace("Z", "+00:00"))
        if recorded.tzinfo is None:
            recorded = recorded.replace(tzinfo=timezone.utc)
        return cls(
            run_id=str(obj["run_id"]),
            recorded_at=recorded,
            time_source=str(obj["time_source"]),
            image_id=obj["image_id"],
            annotation_id=obj["annotation_id"],
            target_class=str(obj["class"]),
            score=float(obj["score"]),
            lat=float(obj["lat"]),
            lon=float(obj["lon"]),
            bearing_deg=float(obj["bearing_deg"]),
            distance_m=float(obj["distance_m"]),
            method=str(obj["method"]),
        )


def _read_raw(path: Path):
    """Validate the store file and return (raw bytes, records, run ids)."""
    raw = path.read_bytes()
    if not raw:
        raise StoreCorrupt("store file exists but is empty")
    text = raw.decode("utf-8", errors="strict") if _is_utf8(raw) else None
    if text is None or not text.endswith("\n"):
        raise StoreCorrupt("store does not end with a complete line")
    lines = text.split("\n")[:-1]
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise StoreCorrupt(f"header line is not valid JSON: {e}") from e
    if not (isinstance(header, dict) and header.get("format") == STORE_FORMAT
            and header.get("version") == STORE_VERSION):
        raise StoreCorrupt(f"unrecognized store header: {header!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise StoreCorrupt(f"line {lineno} is not valid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise StoreCorrupt(f"line {lineno} is not a JSON object")
        records.append(SurveyRecord.from_json_dict(obj))
    return raw, records, {r.run_id for r in records}


def _is_utf8(raw: bytes) -> bool:
    try:
        raw.decode("utf-8")
        return True
    except UnicodeDecodeError:
        return False


def read_records(path) -> list:
    """All records in the store; empty list when the file does not exist."""
    path = Path(path)
    if not path.exists():
        return []
    _, records, _ = _read_raw(path)
    return records


def append_run(path, records: Sequence[GeoDetection], *, run_id: str,
               run_time: datetime, capture_times: Optional[Mapping] = None) -> str:
    """Append one run's geolocated detections; returns the run_id.

    Each record's recorded_at prefers the image's capture time (from
    ``capture_times``, keyed by image_id) over the run time, with a
    time_source flag saying which was used.
    """
    path = Path(path)
    capture_times = capture_times or {}
    if run_time.tzinfo is None:
        run_time = run_time.replace(tzinfo=timezone.utc)

    lock_path = path.with_suffix(path.suffix + ".lock")
    with open(lock_path, "w") as lock_fh:
        if fcntl is not None:
            fcntl.flock(lock_fh, fcntl.LOCK_EX)
        if path.exists():
            existing, _, run_ids = _read_raw(path)
            if run_id in run_ids:
                raise DuplicateRun(f"run_id {run_id!r} already present in {path}")
        else:
            existing = (json.dumps({"format": STORE_FORMAT, "version": STORE_VERSION}) + "\n").encode()

        lines = []
        for geo in records:
            captured = capture_times.get(geo.image_id)
            if captured is not None and captured.tzinfo is None:
                captured = captured.replace(tzinfo=timezone.utc)
            record = SurveyRecord(
                run_id=run_id,
                recorded_at=captured if captured is not None else run_time,
                time_source=TIME_FROM_CAPTURE if captured is not None else TIME_FROM_RUN,
                image_id=geo.image_id,
                annotation_id=geo.annotation_id,
                target_class=geo.target_class,
                score=geo.score,
                lat=geo.position.lat_deg,
                lon=geo.position.lon_deg,
                bearing_deg=geo.bearing_deg,
                distance_m=geo.distance_m,
                method=geo.method,
            )
            lines.append(json.dumps(record.to_json_dict()) + "\n")

        fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as tmp:
                tmp.write(existing)
                tmp.write("".join(lines).encode("utf-8"))
                tmp.flush()
                os.fsync(tmp.fileno())
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    return run_id


def query(path, *, bbox=None, time_range=None, group_by: str,
          cell_m: float = 50.0, cell_origin=None,
          earth_radius_m: float = 6371008.8) -> dict:
    """Aggregate stored detections: counts keyed by cell index, class, or run_id.

    ``bbox`` is (min_lat, min_lon, max_lat, max_lon), bounds inclusive;
    ``time_range`` is (start, end) datetimes, either end open when None,
    both inclusive.  Cell grouping uses the same grid geometry as the map
    export; its origin defaults to the bbox's south-west corner.
    """
    if group_by not in ("cell", "class", "run"):
        raise ValueError(f"group_by must be cell, class, or run; got {group_by!r}")
    if group_by == "cell" and cell_origin is None:
        if bbox is None:
            raise ValueError("cell grouping needs a cell_origin or a bbox")
        cell_origin = (bbox[0], bbox[1])

    counts: dict = {}
    for record in read_records(path):
        if bbox is not None:
            min_lat, min_lon, max_lat, max_lon = bbox
            if not (min_lat <= record.lat <= max_lat and min_lon <= record.lon <= max_lon):
                continue
        if time_range is not None:
            start, end = time_range
            if start is not None and record.recorded_at < start:
                continue
            if end is not None and record.recorded_at > end:
                continue
        if group_by == "cell":
            key = cell_index(record.lat, record.lon, cell_origin, cell_m, earth_radius_m)
        elif group_by == "class":
            key = record.target_class
        else:
            key = record.run_id
        counts[key] = counts.get(key, 0) + 1
    return counts
