"""Detector wire format (stairloc/1) and ROI cropping semantics.

One JSON document per frame, newline-delimited for streams:

    {"schema": "stairloc/1", "frame": str,
     "boxes": [{"bbox": [x_min, y_min, x_max, y_max], "confidence": f,
                "segments": [{"root": [u, v], "d_start": [du, dv],
                              "d_end": [du, dv], "score": f}]}]}

Bounding boxes are in full-image pixels; segment coordinates are local to
the crop, whose origin is the (clamped) box top-left.  Only the stair
class is carried; a record declaring any other class is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import EmptyCrop, InvariantError, OutOfImage, SchemaError
from .segments import LineSegmentTP, SegmentSet

SCHEMA_ID = "stairloc/1"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned stair detection box, full-image pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float = 1.0

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise InvariantError(f"x_min < x_max violated: {self.x_min} >= {self.x_max}")
        if not self.y_min < self.y_max:
            raise InvariantError(f"y_min < y_max violated: {self.y_min} >= {self.y_max}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class BoxDetection:
    """One detected box with its crop-local line segments."""

    box: BoundingBox
    segments: SegmentSet


@dataclass(frozen=True)
class DetectionRecord:
    frame: str
    detections: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))


def crop_roi(box: BoundingBox, image_rect):
    """Clamp a box to the image and return ((width, height), offset).

    The offset is the clamped top-left corner, recorded so crop-local
    segments can be restored to full-image coordinates.
    """
    img_w, img_h = image_rect
    x0 = max(0.0, box.x_min)
    y0 = max(0.0, box.y_min)
    x1 = min(float(img_w), box.x_max)
    y1 = min(float(img_h), box.y_max)
    if not (x1 > x0 and y1 > y0):
        raise EmptyCrop(f"box {box} clamps to zero area in {img_w}x{img_h}")
    return (x1 - x0, y1 - y0), (x0, y0)


def to_full_frame(segset: SegmentSet, image_rect) -> SegmentSet:
    """Translate crop-local segments by their offset into full-image
    coordinates and reset the offset.

    Endpoints that leave the image rectangle by <= 1 px are clamped onto
    it; beyond that OutOfImage is raised (stale offset indicator).
    """
    img_w, img_h = image_rect
    du, dv = segset.offset
    if du == 0 and dv == 0:
        return segset

    def clamp_endpoint(pt):
        u, v = pt
        if u < -1.0 or u > img_w + 1.0 or v < -1.0 or v > img_h + 1.0:
            raise OutOfImage(
                f"endpoint ({u:.2f}, {v:.2f}) outside {img_w}x{img_h} by > 1 px"
            )
        return (min(max(u, 0.0), img_w - 1.0), min(max(v, 0.0), img_h - 1.0))

    moved = []
    for seg in segset.segments:
        root = (seg.root[0] + du, seg.root[1] + dv)
        start = clamp_endpoint((root[0] + seg.d_start[0], root[1] + seg.d_start[1]))
        end = clamp_endpoint((root[0] + seg.d_end[0], root[1] + seg.d_end[1]))
        moved.append(LineSegmentTP(
            root=root,
            d_start=(start[0] - root[0], start[1] - root[1]),
            d_end=(end[0] - root[0], end[1] - root[1]),
            score=seg.score,
        ))
    return replace(segset, segments=tuple(moved), offset=(0.0, 0.0))


# --- wire format -----------------------------------------------------------

def _require(obj, key, kind, line):
    if key not in obj:
        raise SchemaError(f"missing key {key!r}", line=line, field=key)
    value = obj[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"key {key!r} has type {type(value).__name__}",
                          line=line, field=key)
    return value


def _pair(obj, key, line):
    value = _require(obj, key, list, line)
    if len(value) != 2 or not all(isinstance(x, (int, float)) for x in value):
        raise SchemaError(f"key {key!r} must be a pair of numbers", line=line, field=key)
    return (float(value[0]), float(value[1]))


def _parse_record(obj, line):
    if _require(obj, "schema", str, line) != SCHEMA_ID:
        raise SchemaError(f"unsupported schema {obj['schema']!r}", line=line)
    if "class" in obj and obj["class"] != "stair":
        raise InvariantError(f"only the stair class is carried, got {obj['class']!r}")
    frame = _require(obj, "frame", str, line)
    detections = []
    for box_obj in _require(obj, "boxes", list, line):
        bbox = _require(box_obj, "bbox", list, line)
        if len(bbox) != 4 or not all(isinstance(x, (int, float)) for x in bbox):
            raise SchemaError("bbox must be [x_min, y_min, x_max, y_max]",
                              line=line, field="bbox")
        box = BoundingBox(*(float(x) for x in bbox),
                          confidence=_require(box_obj, "confidence", float, line))
        crop_w = box.x_max - box.x_min
        crop_h = box.y_max - box.y_min
        segments = []
        for seg_obj in _require(box_obj, "segments", list, line):
            seg = LineSegmentTP(
                root=_pair(seg_obj, "root", line),
                d_start=_pair(seg_obj, "d_start", line),
                d_end=_pair(seg_obj, "d_end", line),
                score=float(seg_obj.get("score", 1.0)),
            )
            for pt in (seg.start, seg.end):
                if not (0.0 <= pt[0] <= crop_w and 0.0 <= pt[1] <= crop_h):
                    raise InvariantError(
                        f"segment endpoint ({pt[0]:.2f}, {pt[1]:.2f}) outside "
                        f"crop {crop_w:.0f}x{crop_h:.0f} of frame {frame!r}"
                    )
            segments.append(seg)
        detections.append(BoxDetection(
            box=box,
            segments=SegmentSet(segments=tuple(segments),
                                offset=(box.x_min, box.y_min)),
        ))
    return DetectionRecord(frame=frame, detections=tuple(detections))


def parse_detection_file(data) -> list:
    """Parse newline-delimited stairloc/1 JSON into DetectionRecords."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}", line=lineno) from exc
        if not isinstance(obj, dict):
            raise SchemaError("record must be a JSON object", line=lineno)
        records.append(_parse_record(obj, lineno))
    return records


def record_to_obj(record: DetectionRecord) -> dict:
    return {
        "schema": SCHEMA_ID,
        "frame": record.frame,
        "boxes": [
            {
                "bbox": [det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max],
                "confidence": det.box.confidence,
                "segments": [
                    {
                        "root": list(seg.root),
                        "d_start": list(seg.d_start),
                        "d_end": list(seg.d_end),
                        "score": seg.score,
                    }
                    for seg in det.segments.segments
                ],
            }
            for det in record.detections
        ],
    }


def serialize_records(records) -> bytes:
    """Canonical newline-delimited serialization (round-trips with parse)."""
    lines = [json.dumps(record_to_obj(r), separators=(", ", ": ")) for r in records]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


@dataclass(frozen=True)
class FrameBundle:
    """Everything the localizer needs for one frame."""

    depth: "DepthFrame"
    intrinsics: "Intrinsics"
    record: DetectionRecord
    color_path: str | None = None

    def __post_init__(self):
        if (self.depth.width, self.depth.height) != (
            self.intrinsics.width, self.intrinsics.height
        ):
            raise InvariantError(
                f"depth {self.depth.width}x{self.depth.height} does not match "
                f"intrinsics {self.intrinsics.width}x{self.intrinsics.height}"
            )


class FileReplayDetector:
    """Detector that replays a previously recorded detection file."""

    def __init__(self, data):
        self._by_frame = {}
        for record in parse_detection_file(data):
            self._by_frame[record.frame] = record

    def detect(self, frame_id: str) -> DetectionRecord:
        return self._by_frame.get(frame_id, DetectionRecord(frame=frame_id))
