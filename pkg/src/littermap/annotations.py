"""COCO-style annotation ingestion, taxonomy consolidation, and thresholding.

Ground truth and detector output share one file format; ground-truth entries
simply carry score 1.0.  A JSON sidecar supplies camera poses for images
that lack usable EXIF (platform-exported street imagery).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional, Sequence

from .config import PipelineConfig
from .errors import DanglingReference, MalformedJson, MissingField, NoHeading
from .exif import HEADING_ASSUMED, HEADING_TRUE, CameraFix, GeoPoint

OTHER_LITTER = "Other Litter"


@dataclass(frozen=True)
class ImageInfo:
    id: object
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class Detection:
    """One detector (or ground-truth) annotation."""

    annotation_id: object
    image_id: object
    category_id: object
    score: float
    bbox: tuple  # (x, y, w, h) pixels, clipped to image bounds
    polygon: Optional[tuple] = None  # ((x, y), ...) when a segmentation is present


@dataclass(frozen=True)
class Taxonomy:
    categories: dict  # id -> (name, supercategory)
    counts: dict  # supercategory -> annotation count

    def supercategory_of(self, category_id) -> str:
        return self.categories[category_id][1]


@dataclass(frozen=True)
class CategoryMapping:
    """Consolidation of supercategories down to the k largest plus a catch-all."""

    target_classes: tuple  # ordered, catch-all last
    assignment: dict  # supercategory -> target class
    by_category_id: dict  # category id -> target class

    def target_for(self, category_id) -> str:
        return self.by_category_id[category_id]

    def target_for_supercategory(self, name: str) -> str:
        return self.assignment.get(name, OTHER_LITTER)


@dataclass(frozen=True)
class CocoDocument:
    images: tuple
    detections: tuple
    taxonomy: Taxonomy

    def image_ids(self) -> set:
        return {im.id for im in self.images}


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise MissingField(f"{context} is missing {key!r}")
    return obj[key]


def load_coco(data) -> CocoDocument:
    """Parse a COCO-style JSON document (bytes or str).

    Rejects annotations that reference unknown image or category ids, clips
    bounding boxes to their image bounds, and drops segmentation polygons
    with fewer than 3 vertices.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise MalformedJson("top level is not a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise MissingField(f"document is missing the {key!r} array")
        if not isinstance(doc[key], list):
            raise MalformedJson(f"{key!r} is not an array")

    categories = {}
    for cat in doc["categories"]:
        cid = _require(cat, "id", "category")
        name = _require(cat, "name", f"category {cid}")
        supercategory = cat.get("supercategory") or name
        if cid in categories:
            raise MalformedJson(f"duplicate category id {cid!r}")
        categories[cid] = (name, supercategory)

    images = []
    by_image_id = {}
    for im in doc["images"]:
        iid = _require(im, "id", "image")
        info = ImageInfo(
            id=iid,
            file_name=_require(im, "file_name", f"image {iid}"),
            width=int(_require(im, "width", f"image {iid}")),
            height=int(_require(im, "height", f"image {iid}")),
        )
        if info.width < 1 or info.height < 1:
            raise MalformedJson(f"image {iid!r} has non-positive dimensions")
        if iid in by_image_id:
            raise MalformedJson(f"duplicate image id {iid!r}")
        by_image_id[iid] = info
        images.append(info)

    detections = []
    seen_ann = set()
    counts = {supercat: 0 for _, supercat in categories.values()}
    for ann in doc["annotations"]:
        aid = _require(ann, "id", "annotation")
        if aid in seen_ann:
            raise MalformedJson(f"duplicate annotation id {aid!r}")
        seen_ann.add(aid)
        iid = _require(ann, "image_id", f"annotation {aid}")
        if iid not in by_image_id:
            raise DanglingReference(iid, "image")
        cid = _require(ann, "category_id", f"annotation {aid}")
        if cid not in categories:
            raise DanglingReference(cid, "category")
        score = float(ann.get("score", 1.0))
        if not 0.0 <= score <= 1.0:
            raise MalformedJson(f"annotation {aid!r} score {score} outside [0, 1]")
        bbox = _clip_bbox(ann.get("bbox"), by_image_id[iid], aid)
        polygon = _first_polygon(ann.get("segmentation"))
        detections.append(
            Detection(annotation_id=aid, image_id=iid, category_id=cid,
                      score=score, bbox=bbox, polygon=polygon)
        )
        counts[categories[cid][1]] += 1

    taxonomy = Taxonomy(categories=categories, counts=counts)
    return CocoDocument(images=tuple(images), detections=tuple(detections), taxonomy=taxonomy)


def _clip_bbox(raw, image: ImageInfo, ann_id) -> tuple:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 4):
        raise MissingField(f"annotation {ann_id!r} has no valid bbox")
    try:
        x, y, w, h = (float(v) for v in raw)
    except (TypeError, ValueError) as e:
        raise MalformedJson(f"annotation {ann_id!r} bbox is not numeric") from e
    x0 = min(max(x, 0.0), float(image.width))
    y0 = min(max(y, 0.0), float(image.height))
    x1 = min(max(x + w, 0.0), float(image.width))
    y1 = min(max(y + h, 0.0), float(image.height))
    if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
        raise MalformedJson(f"annotation {ann_id!r} bbox has no area inside image bounds")
    return (x0, y0, x1 - x0, y1 - y0)


def _first_polygon(segmentation) -> Optional[tuple]:
    # COCO polygons: list of flat [x0, y0, x1, y1, ...] rings; RLE masks are out of scope
    if not isinstance(segmentation, list) or not segmentation:
        return None
    ring = segmentation[0]
    if not isinstance(ring, list) or len(ring) < 6 or len(ring) % 2 != 0:
        return None
    return tuple((float(ring[i]), float(ring[i + 1])) for i in range(0, len(ring), 2))


def dump_coco(doc: CocoDocument) -> str:
    """Serialize back to COCO-style JSON (the fields load_coco retains)."""
    out = {
        "images": [
            {"id": im.id, "file_name": im.file_name, "width": im.width, "height": im.height}
            for im in doc.images
        ],
        "annotations": [
            {
                "id": d.annotation_id,
                "image_id": d.image_id,
                "category_id": d.category_id,
                "bbox": list(d.bbox),
                "score": d.score,
                **({"segmentation": [[c for xy in d.polygon for c in xy]]} if d.polygon else {}),
            }
            for d in doc.detections
        ],
        "categories": [
            {"id": cid, "name": name, "supercategory": supercat}
            for cid, (name, supercat) in sorted(doc.taxonomy.categories.items(), key=lambda kv: str(kv[0]))
        ],
    }
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def consolidate(taxonomy: Taxonomy, k: int = 9) -> CategoryMapping:
    """Map the k most-annotated supercategories to themselves, the rest to the catch-all.

    Ties on count break lexicographically by supercategory name, so the
    mapping is deterministic for any input.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    ordered = sorted(taxonomy.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [name for name, _ in ordered[:k]]
    keep_set = set(keep)
    assignment = {name: (name if name in keep_set else OTHER_LITTER) for name in taxonomy.counts}
    targets = list(keep)
    if OTHER_LITTER not in keep_set:
        targets.append(OTHER_LITTER)
    by_category_id = {
        cid: assignment[supercat] for cid, (_, supercat) in taxonomy.categories.items()
    }
    return CategoryMapping(target_classes=tuple(targets), assignment=assignment,
                           by_category_id=by_category_id)


def filter_by_confidence(detections: Sequence[Detection], threshold: float) -> list:
    """Keep detections with score >= threshold (boundary inclusive), order preserved."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return [d for d in detections if d.score >= threshold]


def load_sidecar(data, defaults: PipelineConfig) -> list:
    """Parse sidecar camera metadata into CameraFixes.

    Format: JSON array of {image_id, lat, lon, heading_deg, width, height,
    captured_at}.  Sidecar headings are platform-corrected, so they count as
    true-north; a missing heading falls back to the configured default
    (or raises NoHeading under require_heading).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"sidecar is not valid JSON: {e}") from e
    if not isinstance(doc, list):
        raise MalformedJson("sidecar top level is not a JSON array")

    fixes = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise MalformedJson(f"sidecar entry {i} is not an object")
        context = f"sidecar entry {i}"
        image_id = _require(entry, "image_id", context)
        lat = float(_require(entry, "lat", context))
        lon = float(_require(entry, "lon", context))
        width = int(_require(entry, "width", context))
        height = int(_require(entry, "height", context))
        if "heading_deg" in entry and entry["heading_deg"] is not None:
            heading = float(entry["heading_deg"])
            source = HEADING_TRUE
        elif defaults.require_heading:
            raise NoHeading(f"{context} has no heading_deg and config requires one")
        else:
            heading = defaults.heading_deg
            source = HEADING_ASSUMED
        captured_at = _parse_timestamp(entry.get("captured_at"))
        try:
            position = GeoPoint(lat, lon)
        except ValueError as e:
            raise MalformedJson(f"{context}: {e}") from e
        fixes.append(
            CameraFix(
                position=position,
                heading_deg=heading,
                heading_source=source,
                hfov_deg=defaults.hfov_deg,
                image_w_px=width,
                image_h_px=height,
                pitch_deg=defaults.pitch_deg,
                camera_height_m=defaults.camera_height_m,
                captured_at=captured_at,
                image_id=image_id,
            )
        )
    return fixes


def _parse_timestamp(raw) -> Optional[datetime]:
    if not raw:
        return None
    try:
        stamp = datetime.fromisoformat(str(raw).replace("Z", "+00:00"))
    except ValueError:
        return None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp
