"""Pipeline configuration shared by every stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs for the whole pipeline.

    ``camera_height_m=None`` disables the ground-plane range model; every
    detection then falls back to ``default_distance_m``.  ``heading_deg`` is
    the assumed camera heading used when the metadata carries none and
    ``require_heading`` is off.
    """

    confidence_threshold: float = 0.30
    iou_threshold: float = 0.5
    hfov_deg: float = 62.0
    default_distance_m: float = 6.1
    camera_height_m: float | None = 1.4
    pitch_deg: float = 0.0
    earth_radius_m: float = 6371008.8
    grid_cell_m: float = 50.0
    heading_deg: float = 0.0
    require_heading: bool = False

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in [0, 1], got {self.iou_threshold}")
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov_deg must be in (0, 180), got {self.hfov_deg}")
        for name in ("default_distance_m", "earth_radius_m", "grid_cell_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.camera_height_m is not None and self.camera_height_m <= 0:
            raise ValueError("camera_height_m must be positive (or None to disable ground-plane)")

    def updated(self, **overrides) -> "PipelineConfig":
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
