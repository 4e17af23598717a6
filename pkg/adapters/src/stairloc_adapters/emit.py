"""Batch emission of stairloc/1 detection records from an image directory."""

from __future__ import annotations

import json
import os

from .boxes import detect_boxes, read_image
from .config import AdapterConfig
from .errors import AdapterError
from .segments import detect_segments

SCHEMA_ID = "stairloc/1"
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def record_for_image(image_path: str, frame_id: str, cfg: AdapterConfig) -> dict:
    """One stairloc/1 record: boxes plus crop-local segments per box."""
    image = read_image(image_path)
    height, width = image.shape[:2]
    boxes = []
    for box in detect_boxes(image_path, cfg):
        x0, y0, x1, y1 = box["bbox"]
        # crop to the clamped box; segment coordinates are local to it
        cx0, cy0 = max(0, int(x0)), max(0, int(y0))
        cx1, cy1 = min(width, int(round(x1))), min(height, int(round(y1)))
        crop = image[cy0:cy1, cx0:cx1]
        segments = detect_segments(crop, cfg)
        boxes.append({
            "bbox": [float(cx0), float(cy0), float(cx1), float(cy1)],
            "confidence": box["confidence"],
            "segments": segments,
        })
    return {"schema": SCHEMA_ID, "frame": frame_id, "boxes": boxes}


def emit_records(image_dir: str, cfg: AdapterConfig, out_path: str) -> int:
    """Write one record per image to out_path plus a sidecar log.

    Per-image failures are logged and skipped; the return value is the
    number of successfully processed images.  AdapterError is raised only
    when every image fails.
    """
    names = sorted(
        n for n in os.listdir(image_dir)
        if os.path.splitext(n)[1].lower() in IMAGE_EXTENSIONS
    )
    records = []
    failures = []
    for name in names:
        frame_id = os.path.splitext(name)[0]
        try:
            records.append(record_for_image(
                os.path.join(image_dir, name), frame_id, cfg))
        except AdapterError as exc:
            failures.append((name, f"{type(exc).__name__}: {exc}"))
    with open(out_path, "w") as f:
        for record in records:
            f.write(json.dumps(record, separators=(", ", ": ")) + "\n")
    with open(out_path + ".log", "w") as f:
        f.write(f"images: {len(names)}  emitted: {len(records)}  "
                f"failed: {len(failures)}\n")
        for name, message in failures:
            f.write(f"FAIL {name}: {message}\n")
    if names and not records:
        raise AdapterError(f"all {len(names)} images failed; see {out_path}.log")
    return len(records)
