"""Adapter configuration: which backends run and at what thresholds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

BOX_BACKENDS = ("edges", "yolov5")
SEGMENT_BACKENDS = ("hough",)


@dataclass(frozen=True)
class AdapterConfig:
    """Model selection and thresholds for the detection adapters.

    box_backend "edges" is a dependency-free edge-density proposer that
    works on any image; "yolov5" loads user-supplied weights through torch
    hub and maps box_class_names to stair detections.  The segment
    detector resizes every crop to segment_input x segment_input before
    running (model-space coordinates are rescaled back to crop pixels).
    """

    box_backend: str = "edges"
    box_model: str | None = None  # weights path/identifier for yolov5
    box_class_names: tuple = ("stairs", "stair", "staircase")
    segment_backend: str = "hough"
    confidence_threshold: float = 0.3
    segment_score_threshold: float = 0.2
    segment_input: int = 512
    min_segment_length: float = 12.0  # model-space pixels

    def __post_init__(self):
        if self.box_backend not in BOX_BACKENDS:
            raise ConfigError(f"unknown box backend {self.box_backend!r}")
        if self.segment_backend not in SEGMENT_BACKENDS:
            raise ConfigError(f"unknown segment backend {self.segment_backend!r}")
        for name in ("confidence_threshold", "segment_score_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} {value} outside [0, 1]")
        if self.segment_input < 16:
            raise ConfigError(f"segment_input {self.segment_input} too small")


def load_config(path: str | None) -> AdapterConfig:
    if path is None:
        return AdapterConfig()
    with open(path) as f:
        obj = json.load(f)
    allowed = set(AdapterConfig.__dataclass_fields__)
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "box_class_names" in obj:
        obj["box_class_names"] = tuple(obj["box_class_names"])
    return AdapterConfig(**obj)
