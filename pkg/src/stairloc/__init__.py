"""RGB-D staircase localization: camera geometry, line-segment consensus,
pose estimation, synthetic-scene oracle, and roadmap-node registry."""

from . import errors
from .camera import DepthFrame, Intrinsics, project, unproject
from .detection import (
    BoundingBox,
    BoxDetection,
    DetectionRecord,
    FrameBundle,
    crop_roi,
    parse_detection_file,
    serialize_records,
    to_full_frame,
)
from .localizer import (
    ExtrinsicsConfig,
    LocalizeParams,
    StairPose,
    localize,
)
from .registry import RegistryConfig, StairCandidate, StairNode, StairRegistry
from .segments import LineSegmentTP, SegmentSet, ransac_parallel_filter, slope_angle
from .synth import CorruptionSpec, StaircaseSpec, SyntheticScene, build_scene, corrupt

__all__ = [
    "errors",
    "DepthFrame", "Intrinsics", "project", "unproject",
    "BoundingBox", "BoxDetection", "DetectionRecord", "FrameBundle",
    "crop_roi", "parse_detection_file", "serialize_records", "to_full_frame",
    "ExtrinsicsConfig", "LocalizeParams", "StairPose", "localize",
    "RegistryConfig", "StairCandidate", "StairNode", "StairRegistry",
    "LineSegmentTP", "SegmentSet", "ransac_parallel_filter", "slope_angle",
    "CorruptionSpec", "StaircaseSpec", "SyntheticScene", "build_scene", "corrupt",
]

__version__ = "0.1.0"
