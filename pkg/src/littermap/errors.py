"""Typed errors raised across the pipeline.

Every parser and numeric stage fails with one of these instead of leaking
bare ValueError/KeyError, so callers (and the CLI) can distinguish bad
input data from bugs.
"""


class LitterMapError(Exception):
    """Base class for all pipeline errors."""


# --- JPEG / EXIF parsing ---

class ExifError(LitterMapError):
    pass


class NotJpeg(ExifError):
    """Input does not start with the JPEG SOI marker."""


class NoExifSegment(ExifError):
    """No APP1 segment with an Exif header was found."""


class BadTiffHeader(ExifError):
    """TIFF byte-order mark or check value is wrong."""


class Truncated(ExifError):
    """A declared segment, IFD, or value offset points past the end of the input."""


class NoGeotag(ExifError):
    """GPS IFD or the latitude/longitude tags are missing or unusable."""


class ZeroDenominator(ExifError):
    """A GPS rational needed for conversion has denominator zero."""


class NoHeading(ExifError):
    """No heading in the metadata and the config demands one."""


class MissingDimensions(ExifError):
    """Neither EXIF pixel-dimension tags nor a SOF frame header carry the image size."""


# --- annotation ingestion ---

class AnnotationError(LitterMapError):
    pass


class MalformedJson(AnnotationError):
    pass


class MissingField(AnnotationError):
    pass


class DanglingReference(AnnotationError):
    """An annotation references an image or category id that does not exist."""

    def __init__(self, ref_id, kind="id"):
        super().__init__(f"dangling {kind} reference: {ref_id!r}")
        self.ref_id = ref_id
        self.kind = kind


# --- geolocation ---

class PoleUndefined(LitterMapError):
    """Bearing is meaningless this close to a pole."""


# --- evaluation ---

class UndefinedMetric(LitterMapError):
    """Precision/recall denominator is zero; the metric is absent, not 0."""


class ImageSetMismatch(LitterMapError):
    """Prediction document references images absent from the truth document."""


# --- survey store ---

class StoreCorrupt(LitterMapError):
    """An existing store line fails to parse; the store is left untouched."""


class DuplicateRun(LitterMapError):
    """run_id already present in the store."""


# --- synthetic scenes ---

class OutOfCone(LitterMapError):
    """Point projects outside the camera's view frustum."""


class OutOfRange(LitterMapError):
    """Point is outside the distance bounds the placement model supports."""
