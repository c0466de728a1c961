"""littermap: turn geotagged photos plus litter detections into evaluated,
time-aware litter maps."""

from .annotations import (
    CategoryMapping,
    CocoDocument,
    Detection,
    OTHER_LITTER,
    Taxonomy,
    consolidate,
    dump_coco,
    filter_by_confidence,
    load_coco,
    load_sidecar,
)
from .config import PipelineConfig
from .evaluate import (
    ConfusionCounts,
    EvaluationReport,
    MatchResult,
    confusion,
    evaluate_report,
    iou,
    match_detections,
    precision,
    recall,
)
from .exif import (
    CameraFix,
    GeoPoint,
    RawExif,
    extract_camera_fix,
    parse_jpeg_exif,
)
from .geolocate import (
    GeoDetection,
    estimate_distance,
    geodesic_destination,
    locate_detection,
    pixel_bearing,
)
from .mapping import GridCell, grid_bin, grid_to_geojson, render_html, to_geojson
from .store import SurveyRecord, append_run, query, read_records
from .synth import (
    RoundtripStats,
    SyntheticScene,
    generate_scene,
    inverse_geodesic,
    project_to_pixel,
    roundtrip_error,
)

__version__ = "0.1.0"
