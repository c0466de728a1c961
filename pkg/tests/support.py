"""Shared test fixtures: synthetic EXIF/JPEG writers, COCO document builders,
and independent oracles the tests check the library against.

The TIFF writer here is test-only tooling (the package never writes EXIF);
its output is cross-checked against Pillow, so writer and parser cannot
share a bug silently.
"""

from __future__ import annotations

import io
import json
import math
import struct
from random import Random

from littermap.evaluate import iou

TYPE_ASCII = 2
TYPE_SHORT = 3
TYPE_LONG = 4
TYPE_RATIONAL = 5


# --- TIFF / EXIF / JPEG construction ---

def _value_bytes(vtype, value, e):
    if vtype == TYPE_ASCII:
        raw = value.encode("ascii") + b"\x00"
        return raw, len(raw)
    if vtype == TYPE_SHORT:
        return b"".join(struct.pack(e + "H", v) for v in value), len(value)
    if vtype == TYPE_LONG:
        return b"".join(struct.pack(e + "I", v) for v in value), len(value)
    if vtype == TYPE_RATIONAL:
        return b"".join(struct.pack(e + "II", n, d) for n, d in value), len(value)
    raise ValueError(f"unsupported type {vtype}")


def build_tiff(ifd0=(), exif_ifd=None, gps_ifd=None, byte_order="little"):
    """Serialize a TIFF block with IFD0 plus optional Exif/GPS sub-IFDs.

    Entries are (tag, type, value) triples; values follow _value_bytes.
    """
    e = "<" if byte_order == "little" else ">"
    mark = b"II" if byte_order == "little" else b"MM"

    n0 = len(ifd0) + (exif_ifd is not None) + (gps_ifd is not None)
    off_ifd0 = 8
    size0 = 2 + 12 * n0 + 4
    off_exif = off_ifd0 + size0
    size_exif = (2 + 12 * len(exif_ifd) + 4) if exif_ifd is not None else 0
    off_gps = off_exif + size_exif
    size_gps = (2 + 12 * len(gps_ifd) + 4) if gps_ifd is not None else 0
    data_base = off_gps + size_gps

    data = bytearray()

    def entry(tag, vtype, value):
        raw, count = _value_bytes(vtype, value, e)
        head = struct.pack(e + "HHI", tag, vtype, count)
        if len(raw) <= 4:
            return head + raw.ljust(4, b"\x00")
        offset = data_base + len(data)
        data.extend(raw)
        return head + struct.pack(e + "I", offset)

    def serialize(entries):
        body = struct.pack(e + "H", len(entries))
        for tag, vtype, value in sorted(entries, key=lambda t: t[0]):
            body += entry(tag, vtype, value)
        return body + struct.pack(e + "I", 0)

    full_ifd0 = list(ifd0)
    if exif_ifd is not None:
        full_ifd0.append((0x8769, TYPE_LONG, [off_exif]))
    if gps_ifd is not None:
        full_ifd0.append((0x8825, TYPE_LONG, [off_gps]))

    out = mark + struct.pack(e + "H", 42) + struct.pack(e + "I", off_ifd0)
    out += serialize(full_ifd0)
    if exif_ifd is not None:
        out += serialize(exif_ifd)
    if gps_ifd is not None:
        out += serialize(gps_ifd)
    return bytes(out + data)


def gps_entries(lat_dms, lat_ref, lon_dms, lon_ref, heading=None, heading_ref="T"):
    entries = [
        (0x0001, TYPE_ASCII, lat_ref),
        (0x0002, TYPE_RATIONAL, list(lat_dms)),
        (0x0003, TYPE_ASCII, lon_ref),
        (0x0004, TYPE_RATIONAL, list(lon_dms)),
    ]
    if heading is not None:
        if heading_ref is not None:
            entries.append((0x0010, TYPE_ASCII, heading_ref))
        entries.append((0x0011, TYPE_RATIONAL, [heading]))
    return entries


def camera_exif_entries(f35=None, pixel_dims=None, captured="2026:08:01 10:30:00"):
    entries = []
    if captured:
        entries.append((0x9003, TYPE_ASCII, captured))
    if pixel_dims:
        entries.append((0xA002, TYPE_LONG, [pixel_dims[0]]))
        entries.append((0xA003, TYPE_LONG, [pixel_dims[1]]))
    if f35:
        entries.append((0xA405, TYPE_SHORT, [f35]))
    return entries


def splice_jpeg(tiff, size=(640, 480)):
    """A real JPEG (Pillow-encoded) with our APP1 Exif segment spliced in."""
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", size, (88, 112, 88)).save(buf, format="JPEG")
    base = buf.getvalue()
    payload = b"Exif\x00\x00" + tiff
    app1 = b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload
    return base[:2] + app1 + base[2:]


def minimal_jpeg(tiff=None, sof_size=None):
    """Hand-rolled JPEG skeleton for malformed cases Pillow cannot emit."""
    out = b"\xff\xd8"
    if tiff is not None:
        payload = b"Exif\x00\x00" + tiff
        out += b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload
    if sof_size:
        w, h = sof_size
        sof = struct.pack(">BHHB", 8, h, w, 1) + bytes([1, 0x11, 0])
        out += b"\xff\xc0" + struct.pack(">H", len(sof) + 2) + sof
    return out + b"\xff\xd9"


DEFAULT_LAT_DMS = ((38, 1), (33, 1), (4020, 100))   # 38.5611666... N
DEFAULT_LON_DMS = ((121, 1), (25, 1), (2784, 100))  # 121.4244 W


def camera_jpeg(lat_dms=DEFAULT_LAT_DMS, lat_ref="N", lon_dms=DEFAULT_LON_DMS,
                lon_ref="W", heading=((900, 10),), heading_ref="T", f35=26,
                pixel_dims=(640, 480), captured="2026:08:01 10:30:00",
                byte_order="little", size=(640, 480), include_gps=True):
    heading_pair = heading[0] if heading else None
    gps = gps_entries(lat_dms, lat_ref, lon_dms, lon_ref,
                      heading=heading_pair, heading_ref=heading_ref) if include_gps else None
    tiff = build_tiff(
        exif_ifd=camera_exif_entries(f35=f35, pixel_dims=pixel_dims, captured=captured),
        gps_ifd=gps,
        byte_order=byte_order,
    )
    return splice_jpeg(tiff, size=size)


# --- COCO document builders ---

def coco_json(images, annotations, categories):
    return json.dumps({"images": images, "annotations": annotations,
                       "categories": categories})


def simple_coco(n_images=1, boxes=((10, 10, 50, 50),), scores=None,
                image_size=(640, 480), category_count=1):
    """One small document: boxes cycle across images, categories cycle per box."""
    w, h = image_size
    images = [{"id": i + 1, "file_name": f"img_{i:03d}.jpg", "width": w, "height": h}
              for i in range(n_images)]
    categories = [{"id": c + 1, "name": f"cat{c + 1}", "supercategory": f"Super{c + 1}"}
                  for c in range(category_count)]
    annotations = []
    for i, box in enumerate(boxes):
        annotations.append({
            "id": i + 1,
            "image_id": (i % n_images) + 1,
            "category_id": (i % category_count) + 1,
            "bbox": list(box),
            "score": 1.0 if scores is None else scores[i],
        })
    return coco_json(images, annotations, categories)


def _slots(x_start, x_stop, box, img_w=640, img_h=480):
    xs = list(range(x_start, x_stop - box, box + 10))
    ys = list(range(10, img_h - box - 10, box + 10))
    for y in ys:
        for x in xs:
            yield x, y


def confusion_fixture(n_images, tp, fp, fn, below_threshold=0, box=20):
    """(pred_json, truth_json) engineered to produce exactly (tp, fp, fn).

    Truth boxes live in the left half of each image, false-positive
    predictions in the right half (disjoint by construction); matched
    predictions copy their truth box exactly (IoU 1).  Scores: matched 0.9,
    false positives 0.8, ignored extras 0.1.
    """
    images = [{"id": i + 1, "file_name": f"img_{i:04d}.jpg", "width": 640, "height": 480}
              for i in range(n_images)]
    categories = [{"id": c + 1, "name": f"cat{c + 1}", "supercategory": f"Super{c + 1}"}
                  for c in range(3)]

    def positions(region):
        for i in range(n_images):
            for x, y in _slots(*region, box):
                yield i + 1, x, y

    truth_anns = []
    left = positions((10, 300))
    for k in range(tp + fn):
        img, x, y = next(left)
        truth_anns.append({"id": k + 1, "image_id": img, "category_id": (k % 3) + 1,
                           "bbox": [x, y, box, box], "score": 1.0})

    pred_anns = []
    for k in range(tp):
        t = truth_anns[k]
        pred_anns.append({"id": k + 1, "image_id": t["image_id"],
                          "category_id": t["category_id"], "bbox": list(t["bbox"]),
                          "score": 0.9})
    right = positions((400, 630))
    for k in range(fp):
        img, x, y = next(right)
        pred_anns.append({"id": tp + k + 1, "image_id": img, "category_id": (k % 3) + 1,
                          "bbox": [x, y, box, box], "score": 0.8})
    for k in range(below_threshold):
        img, x, y = next(right)
        pred_anns.append({"id": tp + fp + k + 1, "image_id": img,
                          "category_id": (k % 3) + 1, "bbox": [x, y, box, box],
                          "score": 0.1})

    pred = coco_json(images, pred_anns, categories)
    truth = coco_json(images, truth_anns, categories)
    return pred, truth


TACO_SUPERCATS = (
    "Bottle", "Bottle cap", "Can", "Carton", "Cigarette", "Cup", "Lid",
    "Other plastic", "Paper", "Plastic bag & wrapper", "Plastic container",
    "Plastic film", "Straw", "Styrofoam piece", "Unlabeled litter",
    "Aluminium foil", "Battery", "Blister pack", "Broken glass", "Food waste",
)


def taco_like_json(seed=7, n_images=1500, n_annotations=4784, n_categories=60):
    """A document shaped like the training corpus: 60 categories over 20
    supercategories with a long-tailed annotation distribution."""
    rng = Random(seed)
    categories = [
        {"id": i + 1,
         "name": f"{TACO_SUPERCATS[i % len(TACO_SUPERCATS)]} variant {i // len(TACO_SUPERCATS) + 1}",
         "supercategory": TACO_SUPERCATS[i % len(TACO_SUPERCATS)]}
        for i in range(n_categories)
    ]
    images = [{"id": i + 1, "file_name": f"batch/{i + 1:06d}.jpg", "width": 640, "height": 480}
              for i in range(n_images)]
    # long tail: category i drawn with weight ~ 1/(i+1), every category seen at least once
    weights = [1.0 / (i + 1) for i in range(n_categories)]
    annotations = []
    for k in range(n_annotations):
        if k < n_categories:
            cat = k + 1
        else:
            cat = rng.choices(range(1, n_categories + 1), weights=weights)[0]
        img = rng.randrange(n_images) + 1
        x = rng.uniform(0, 600)
        y = rng.uniform(0, 440)
        annotations.append({"id": k + 1, "image_id": img, "category_id": cat,
                            "bbox": [x, y, rng.uniform(5, 39), rng.uniform(5, 39)],
                            "score": 1.0})
    return coco_json(images, annotations, categories)


def locate_fixture(tmp_path, n_images=20):
    """Directory of geotagged JPEGs plus a detections file referencing them.

    Per image: three detections at scores 0.9 / 0.31 / 0.1, so exactly two
    survive the 0.30 threshold.  Returns (images_dir, detections_path,
    expected_feature_count).
    """
    images_dir = tmp_path / "images"
    images_dir.mkdir()
    images = []
    annotations = []
    ann_id = 0
    for i in range(n_images):
        name = f"img_{i:03d}.jpg"
        lat_dms = ((38, 1), (33, 1), (4000 + 7 * i, 100))
        lon_dms = ((121, 1), (25, 1), (2700 + 11 * i, 100))
        heading = ((int(i * 37.0 % 360) * 10, 10),)
        jpeg = camera_jpeg(lat_dms=lat_dms, lon_dms=lon_dms, heading=heading,
                           heading_ref="T" if i % 3 else "M",
                           pixel_dims=None if i % 4 == 0 else (640, 480),
                           captured=f"2026:08:{(i % 7) + 1:02d} 09:15:00",
                           byte_order="big" if i % 2 else "little")
        (images_dir / name).write_bytes(jpeg)
        images.append({"id": i + 1, "file_name": name, "width": 640, "height": 480})
        for score in (0.9, 0.31, 0.1):
            ann_id += 1
            annotations.append({
                "id": ann_id, "image_id": i + 1, "category_id": (ann_id % 3) + 1,
                "bbox": [40 + (ann_id % 5) * 90, 250 + (ann_id % 3) * 60, 40, 40],
                "score": score,
            })
    categories = [{"id": c + 1, "name": f"cat{c + 1}", "supercategory": f"Super{c + 1}"}
                  for c in range(3)]
    detections_path = tmp_path / "detections.json"
    detections_path.write_text(coco_json(images, annotations, categories))
    return images_dir, detections_path, n_images * 2


# --- independent oracles ---

def integrate_destination(lat_deg, lon_deg, bearing_deg, distance_m, radius_m,
                          step_m=1.0):
    """Brute-force great-circle walk: rotate 3D position/tangent unit vectors
    in steps of step_m.  Deliberately not the spherical-trig formula."""
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    theta = math.radians(bearing_deg)
    clat, slat = math.cos(lat), math.sin(lat)
    clon, slon = math.cos(lon), math.sin(lon)
    px, py, pz = clat * clon, clat * slon, slat
    nx, ny, nz = -slat * clon, -slat * slon, clat
    ex, ey = -slon, clon
    ct, st = math.cos(theta), math.sin(theta)
    tx, ty, tz = nx * ct + ex * st, ny * ct + ey * st, nz * ct

    remaining = distance_m
    while remaining > 1e-12:
        ds = step_m if remaining >= step_m else remaining
        a = ds / radius_m
        ca, sa = math.cos(a), math.sin(a)
        px, tx = px * ca + tx * sa, tx * ca - px * sa
        py, ty = py * ca + ty * sa, ty * ca - py * sa
        pz, tz = pz * ca + tz * sa, tz * ca - pz * sa
        remaining -= ds
    return (math.degrees(math.asin(max(-1.0, min(1.0, pz)))),
            math.degrees(math.atan2(py, px)))


def max_pairing_count(preds, truths, threshold):
    """Maximum one-to-one pair count at the IoU threshold, by exhaustive
    enumeration of assignments.  Only viable for small inputs."""
    best = 0
    used = [False] * len(truths)

    def recurse(i, acc):
        nonlocal best
        if i == len(preds):
            best = max(best, acc)
            return
        recurse(i + 1, acc)
        for j, truth in enumerate(truths):
            if not used[j] and iou(preds[i].bbox, truth.bbox) >= threshold:
                used[j] = True
                recurse(i + 1, acc + 1)
                used[j] = False

    recurse(0, 0)
    return best


def pil_reference_gps(jpeg_bytes):
    """Latitude/longitude per Pillow, the independent EXIF reference."""
    from PIL import Image

    with Image.open(io.BytesIO(jpeg_bytes)) as im:
        gps = im.getexif().get_ifd(0x8825)
    if not gps:
        return None

    def dms(values, ref, negative):
        deg = float(values[0]) + float(values[1]) / 60.0 + float(values[2]) / 3600.0
        return -deg if ref in negative else deg

    lat = dms(gps[2], gps[1], ("S",))
    lon = dms(gps[4], gps[3], ("W",))
    return lat, lon
