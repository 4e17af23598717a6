"""Line-segment detection on cropped stair images.

Crops are resized to a fixed square model input before detection; the
detected segments are rescaled back to crop-local pixels and emitted in
tri-point form (root + start/end displacements), which is what the
stairloc/1 wire format carries.
"""

from __future__ import annotations

import math

import numpy as np

from .config import AdapterConfig


def rescale_point(point, model_size, crop_size):
    """Map a model-space point back into crop pixels.

    model_size and crop_size are (width, height); scaling is per-axis.
    """
    mw, mh = model_size
    cw, ch = crop_size
    return (point[0] * cw / mw, point[1] * ch / mh)


def segment_to_tp(start, end, score: float) -> dict:
    """Tri-point wire record rooted at the segment midpoint."""
    root = ((start[0] + end[0]) / 2.0, (start[1] + end[1]) / 2.0)
    return {
        "root": [root[0], root[1]],
        "d_start": [start[0] - root[0], start[1] - root[1]],
        "d_end": [end[0] - root[0], end[1] - root[1]],
        "score": float(score),
    }


def _clamp(point, crop_size):
    return (min(max(point[0], 0.0), float(crop_size[0])),
            min(max(point[1], 0.0), float(crop_size[1])))


def detect_segments(crop: np.ndarray, cfg: AdapterConfig):
    """TP segment records (crop-local pixels) for one cropped image."""
    import cv2

    crop_h, crop_w = crop.shape[:2]
    if crop_h < 2 or crop_w < 2:
        return []
    size = cfg.segment_input
    resized = cv2.resize(crop, (size, size), interpolation=cv2.INTER_AREA)
    if resized.ndim == 3:
        grey = cv2.cvtColor(resized, cv2.COLOR_RGB2GRAY)
    else:
        grey = resized
    edges = cv2.Canny(grey, 60, 160)
    lines = cv2.HoughLinesP(edges, rho=1, theta=math.pi / 180.0, threshold=40,
                            minLineLength=cfg.min_segment_length, maxLineGap=6)
    if lines is None:
        return []
    records = []
    for line in np.asarray(lines).reshape(-1, 4):
        x0, y0, x1, y1 = (float(v) for v in line)
        length = math.hypot(x1 - x0, y1 - y0)
        score = min(1.0, length / size)
        if score < cfg.segment_score_threshold:
            continue
        start = _clamp(rescale_point((float(x0), float(y0)), (size, size),
                                     (crop_w, crop_h)), (crop_w, crop_h))
        end = _clamp(rescale_point((float(x1), float(y1)), (size, size),
                                   (crop_w, crop_h)), (crop_w, crop_h))
        if math.hypot(end[0] - start[0], end[1] - start[1]) < 2.0:
            continue
        records.append(segment_to_tp(start, end, score))
    return records
