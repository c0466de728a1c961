"""Byte-level JPEG/EXIF reader for camera geotags and orientation.

Walks the JPEG segment stream for the APP1 "Exif" payload, then decodes the
embedded TIFF structure (IFD0, Exif sub-IFD, GPS sub-IFD).  Only tags the
pipeline consumes are decoded; everything else is skipped by its declared
size and never dereferenced, so arbitrary input either yields a ``RawExif``
or one of the typed errors, with no out-of-bounds reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Union

from .config import PipelineConfig
from .errors import (
    BadTiffHeader,
    MissingDimensions,
    NoExifSegment,
    NoGeotag,
    NoHeading,
    NotJpeg,
    Truncated,
    ZeroDenominator,
)

# decoded entry values: ascii text, unsigned short/long list, rational pair list
ExifValue = Union[str, tuple]

IFD0 = "ifd0"
IFD_EXIF = "exif"
IFD_GPS = "gps"

TAG_GPS_LAT_REF = 0x0001
TAG_GPS_LAT = 0x0002
TAG_GPS_LON_REF = 0x0003
TAG_GPS_LON = 0x0004
TAG_GPS_DIRECTION_REF = 0x0010
TAG_GPS_DIRECTION = 0x0011
TAG_DATETIME_ORIGINAL = 0x9003
TAG_PIXEL_X = 0xA002
TAG_PIXEL_Y = 0xA003
TAG_FOCAL_35MM = 0xA405

_EXIF_POINTER = 0x8769
_GPS_POINTER = 0x8825

# everything else is skipped by declared size
_WANTED_GPS = frozenset(range(0x0001, 0x0007)) | frozenset({0x0010, 0x0011, 0x0012})
_WANTED_EXIF = frozenset({TAG_DATETIME_ORIGINAL, TAG_PIXEL_X, TAG_PIXEL_Y, TAG_FOCAL_35MM})

# TIFF field type -> bytes per component
_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 7: 1, 8: 2, 9: 4, 10: 8, 11: 4, 12: 8}

HEADING_TRUE = "true-north"
HEADING_MAGNETIC = "magnetic"
HEADING_ASSUMED = "assumed"


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 position in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude {self.lon_deg} outside [-180, 180]")


@dataclass(frozen=True)
class CameraFix:
    """Per-image camera pose: where the camera was and how it looked.

    ``heading_deg`` is stored normalized to [0, 360); ``pitch_deg`` is tilt
    below the horizon, positive downward.
    """

    position: GeoPoint
    heading_deg: float
    heading_source: str  # true-north | magnetic | assumed
    hfov_deg: float
    image_w_px: int
    image_h_px: int
    pitch_deg: float = 0.0
    camera_height_m: Optional[float] = None
    captured_at: Optional[datetime] = None
    image_id: object = ""

    def __post_init__(self):
        object.__setattr__(self, "heading_deg", normalize_heading(self.heading_deg))
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov_deg must be in (0, 180), got {self.hfov_deg}")
        if self.image_w_px < 1 or self.image_h_px < 1:
            raise ValueError("image dimensions must be >= 1 pixel")
        if self.camera_height_m is not None and self.camera_height_m <= 0:
            raise ValueError("camera_height_m must be positive")
        if self.heading_source not in (HEADING_TRUE, HEADING_MAGNETIC, HEADING_ASSUMED):
            raise ValueError(f"unknown heading_source {self.heading_source!r}")


@dataclass(frozen=True)
class RawExif:
    """Decoded EXIF entries, keyed by (ifd name, tag id).

    ``sof_size`` carries (width, height) from the JPEG SOF0/SOF2 frame header
    as a fallback when the EXIF pixel-dimension tags are absent.
    """

    byte_order: str  # "little" | "big"
    entries: dict = field(default_factory=dict)
    has_gps_ifd: bool = False
    sof_size: Optional[tuple] = None


def normalize_heading(deg: float) -> float:
    """Fold any angle into [0, 360)."""
    b = deg % 360.0
    return 0.0 if b >= 360.0 else b


def dms_to_degrees(d: float, m: float, s: float) -> float:
    return d + m / 60.0 + s / 3600.0


def hfov_from_focal35(f35_mm: float) -> float:
    """Horizontal FOV in degrees from a 35mm-equivalent focal length (36mm frame width)."""
    return math.degrees(2.0 * math.atan(36.0 / (2.0 * f35_mm)))


def _u(buf: bytes, off: int, size: int, order: str) -> int:
    if off < 0 or off + size > len(buf):
        raise Truncated(f"read of {size} bytes at offset {off} past end ({len(buf)} bytes)")
    return int.from_bytes(buf[off:off + size], order)


def parse_jpeg_exif(data: bytes) -> RawExif:
    """Decode the EXIF block of a JPEG byte string.

    Raises NotJpeg, NoExifSegment, BadTiffHeader, or Truncated; never reads
    out of bounds regardless of input.
    """
    n = len(data)
    if n < 2 or data[0:2] != b"\xff\xd8":
        raise NotJpeg("input does not start with the JPEG SOI marker")

    tiff = None
    sof = None
    pos = 2
    while pos + 1 < n:
        if data[pos] != 0xFF:
            break  # not a marker: nothing further we can interpret
        marker = data[pos + 1]
        if marker == 0xFF:  # fill byte before a marker
            pos += 1
            continue
        if marker in (0xD8, 0x01) or 0xD0 <= marker <= 0xD7:
            pos += 2  # standalone markers carry no length
            continue
        if marker in (0xD9, 0xDA):
            break  # EOI / start of entropy-coded scan: metadata cannot follow
        if pos + 4 > n:
            raise Truncated("segment length field past end of file")
        seg_len = int.from_bytes(data[pos + 2:pos + 4], "big")
        if seg_len < 2:
            raise Truncated(f"segment 0xFF{marker:02X} declares impossible length {seg_len}")
        end = pos + 2 + seg_len
        if end > n:
            raise Truncated(f"segment 0xFF{marker:02X} extends past end of file")
        payload = data[pos + 4:end]
        if marker == 0xE1 and tiff is None and payload[:6] == b"Exif\x00\x00":
            tiff = payload[6:]
        elif marker in (0xC0, 0xC2) and sof is None and len(payload) >= 5:
            h = int.from_bytes(payload[1:3], "big")
            w = int.from_bytes(payload[3:5], "big")
            if w > 0 and h > 0:
                sof = (w, h)
        pos = end

    if tiff is None:
        raise NoExifSegment("no APP1 segment with an Exif header")
    byte_order, entries, has_gps = _parse_tiff(bytes(tiff))
    return RawExif(byte_order=byte_order, entries=entries, has_gps_ifd=has_gps, sof_size=sof)


def _parse_tiff(tiff: bytes):
    if len(tiff) < 2:
        raise BadTiffHeader("TIFF block too short for a byte-order mark")
    mark = tiff[0:2]
    if mark == b"II":
        order = "little"
    elif mark == b"MM":
        order = "big"
    else:
        raise BadTiffHeader(f"unknown byte-order mark {mark!r}")
    if len(tiff) < 8:
        raise Truncated("TIFF header shorter than 8 bytes")
    if _u(tiff, 2, 2, order) != 42:
        raise BadTiffHeader("TIFF check value is not 42")
    ifd0_off = _u(tiff, 4, 4, order)

    entries: dict = {}
    pointers = _read_ifd(tiff, ifd0_off, order, IFD0, frozenset(), entries, collect_pointers=True)
    exif_off = pointers.get(_EXIF_POINTER)
    if exif_off is not None:
        _read_ifd(tiff, exif_off, order, IFD_EXIF, _WANTED_EXIF, entries)
    gps_off = pointers.get(_GPS_POINTER)
    has_gps = gps_off is not None
    if has_gps:
        _read_ifd(tiff, gps_off, order, IFD_GPS, _WANTED_GPS, entries)
    return order, entries, has_gps


def _read_ifd(tiff, offset, order, ifd_name, wanted, entries, collect_pointers=False):
    count = _u(tiff, offset, 2, order)
    table_end = offset + 2 + 12 * count
    if table_end > len(tiff):
        raise Truncated(f"{ifd_name} entry table runs past end of TIFF block")

    pointers = {}
    for i in range(count):
        base = offset + 2 + 12 * i
        tag = _u(tiff, base, 2, order)
        vtype = _u(tiff, base + 2, 2, order)
        vcount = _u(tiff, base + 4, 4, order)
        if collect_pointers and tag in (_EXIF_POINTER, _GPS_POINTER):
            if vtype in (3, 4) and vcount == 1:
                pointers[tag] = _u(tiff, base + 8, _TYPE_SIZES[vtype], order)
            continue
        if tag not in wanted:
            continue
        unit = _TYPE_SIZES.get(vtype)
        if unit is None:
            continue  # unknown field type: size unknowable, skip the entry
        size = unit * vcount
        if size <= 4:
            value_off = base + 8
        else:
            value_off = _u(tiff, base + 8, 4, order)
            if value_off + size > len(tiff):
                raise Truncated(f"value of tag 0x{tag:04X} at offset {value_off} past end of TIFF block")
        value = _decode_value(tiff, value_off, vtype, vcount, order)
        if value is not None:
            entries[(ifd_name, tag)] = value
    return pointers


def _decode_value(tiff, off, vtype, vcount, order):
    if vtype == 2:  # ASCII, NUL-terminated
        raw = tiff[off:off + vcount]
        return raw.rstrip(b"\x00").decode("ascii", errors="replace")
    if vtype == 3:  # unsigned short
        return tuple(_u(tiff, off + 2 * i, 2, order) for i in range(vcount))
    if vtype == 4:  # unsigned long
        return tuple(_u(tiff, off + 4 * i, 4, order) for i in range(vcount))
    if vtype == 5:  # unsigned rational
        return tuple(
            (_u(tiff, off + 8 * i, 4, order), _u(tiff, off + 8 * i + 4, 4, order))
            for i in range(vcount)
        )
    return None  # type understood but not needed for any wanted tag


def _ratio(pair, what: str) -> float:
    num, den = pair
    if den == 0:
        raise ZeroDenominator(f"{what} rational has denominator 0")
    return num / den


def _gps_coordinate(entries, ref_tag, val_tag, positive_ref, negative_ref, what, limit):
    value = entries.get((IFD_GPS, val_tag))
    ref = entries.get((IFD_GPS, ref_tag))
    if value is None or ref is None:
        raise NoGeotag(f"GPS {what} tags missing")
    if not (isinstance(value, tuple) and len(value) >= 3 and all(isinstance(v, tuple) for v in value[:3])):
        raise NoGeotag(f"GPS {what} is not a degrees/minutes/seconds rational triple")
    if not isinstance(ref, str):
        raise NoGeotag(f"GPS {what} reference is not text")
    d, m, s = (_ratio(value[i], f"GPS {what}") for i in range(3))
    degrees = dms_to_degrees(d, m, s)
    r = ref.strip().upper()
    if r == positive_ref:
        sign = 1.0
    elif r == negative_ref:
        sign = -1.0
    else:
        raise NoGeotag(f"unrecognized GPS {what} reference {ref!r}")
    if degrees > limit:
        raise NoGeotag(f"GPS {what} {degrees} exceeds {limit} degrees")
    return sign * degrees


def _first_int(value):
    if isinstance(value, tuple) and value and isinstance(value[0], int):
        return value[0]
    return None


def extract_camera_fix(exif: RawExif, defaults: PipelineConfig, image_id: object = "") -> CameraFix:
    """Build a CameraFix from decoded EXIF entries plus configured defaults.

    Latitude/longitude come from the GPS rationals; heading from
    GPSImgDirection when present (source flagged true-north vs magnetic per
    its Ref tag, magnetic when the Ref is absent), otherwise the configured
    default with source "assumed" (unless require_heading is set, which
    raises NoHeading instead).  Horizontal FOV derives from the 35mm-equivalent
    focal length when available.  Pitch and camera height always come from
    defaults; EXIF rarely carries them.
    """
    entries = exif.entries
    if not exif.has_gps_ifd:
        raise NoGeotag("no GPS IFD in EXIF block")

    lat = _gps_coordinate(entries, TAG_GPS_LAT_REF, TAG_GPS_LAT, "N", "S", "latitude", 90.0)
    lon = _gps_coordinate(entries, TAG_GPS_LON_REF, TAG_GPS_LON, "E", "W", "longitude", 180.0)
    position = GeoPoint(lat, lon)

    direction = entries.get((IFD_GPS, TAG_GPS_DIRECTION))
    if isinstance(direction, tuple) and direction and isinstance(direction[0], tuple):
        heading = _ratio(direction[0], "GPS image direction")
        ref = entries.get((IFD_GPS, TAG_GPS_DIRECTION_REF), "M")
        source = HEADING_TRUE if isinstance(ref, str) and ref.strip().upper().startswith("T") else HEADING_MAGNETIC
    elif defaults.require_heading:
        raise NoHeading("no GPSImgDirection and config requires a heading")
    else:
        heading = defaults.heading_deg
        source = HEADING_ASSUMED

    f35 = _first_int(entries.get((IFD_EXIF, TAG_FOCAL_35MM)))
    hfov = hfov_from_focal35(f35) if f35 else defaults.hfov_deg

    width = _first_int(entries.get((IFD_EXIF, TAG_PIXEL_X)))
    height = _first_int(entries.get((IFD_EXIF, TAG_PIXEL_Y)))
    if not width or not height:
        if exif.sof_size is None:
            raise MissingDimensions("no EXIF pixel-dimension tags and no SOF frame header")
        width, height = exif.sof_size

    captured_at = None
    stamp = entries.get((IFD_EXIF, TAG_DATETIME_ORIGINAL))
    if isinstance(stamp, str):
        try:
            captured_at = datetime.strptime(stamp.strip(), "%Y:%m:%d %H:%M:%S").replace(tzinfo=timezone.utc)
        except ValueError:
            captured_at = None

    return CameraFix(
        position=position,
        heading_deg=heading,
        heading_source=source,
        hfov_deg=hfov,
        image_w_px=width,
        image_h_px=height,
        pitch_deg=defaults.pitch_deg,
        camera_height_m=defaults.camera_height_m,
        captured_at=captured_at,
        image_id=image_id,
    )
