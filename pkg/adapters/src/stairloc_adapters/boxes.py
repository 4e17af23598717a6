"""Stair bounding-box proposers.

The "edges" backend needs no weights: staircases photograph as stacks of
near-horizontal edges, so it scores rows by horizontal-edge density and
returns the bounding rectangle of the densest band.  The "yolov5" backend
wraps user-supplied weights through torch hub and filters detections to
the configured stair class names.
"""

from __future__ import annotations

import numpy as np

from .config import AdapterConfig
from .errors import ImageReadError, ModelLoadError


def read_image(path: str) -> np.ndarray:
    """Load an image as an RGB uint8 array."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ImageReadError(f"{path}: {exc}") from exc


def _edge_density_boxes(image: np.ndarray, cfg: AdapterConfig):
    import cv2

    grey = cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)
    edges = cv2.Canny(grey, 60, 160)
    # horizontal-edge emphasis: dilate along x so broken nosing edges fuse
    kernel = cv2.getStructuringElement(cv2.MORPH_RECT, (15, 1))
    fused = cv2.dilate(edges, kernel)
    height, width = fused.shape
    row_density = fused.sum(axis=1) / (255.0 * width)
    active = np.nonzero(row_density > 0.15)[0]
    if len(active) == 0:
        return []
    # group edge-dense rows into bands, tolerating the tread-height gaps
    # between consecutive nosing edges
    gap_max = max(10, height // 6)
    bands = []
    band_start = active[0]
    prev = active[0]
    for v in active[1:]:
        if v - prev > gap_max:
            bands.append((band_start, prev + 1))
            band_start = v
        prev = v
    bands.append((band_start, prev + 1))
    v0, v1 = max(bands, key=lambda b: float(row_density[b[0]:b[1]].sum()))
    band_rows = row_density[v0:v1]
    strong = band_rows[band_rows > 0.15]
    if v1 - v0 < 10:
        return []
    cols = fused[v0:v1].sum(axis=0)
    filled = np.nonzero(cols > 0)[0]
    if len(filled) < 10:
        return []
    u0, u1 = int(filled[0]), int(filled[-1]) + 1
    pad = 4
    confidence = float(min(1.0, strong.mean())) if len(strong) else 0.0
    if confidence < cfg.confidence_threshold:
        return []
    return [{
        "bbox": [float(max(0, u0 - pad)), float(max(0, v0 - pad)),
                 float(min(width, u1 + pad)), float(min(height, v1 + pad))],
        "confidence": float(confidence),
    }]


_YOLO_CACHE = {}


def _yolov5_boxes(image: np.ndarray, cfg: AdapterConfig):
    if cfg.box_model is None:
        raise ModelLoadError("yolov5 backend needs box_model weights")
    model = _YOLO_CACHE.get(cfg.box_model)
    if model is None:
        try:
            import torch

            model = torch.hub.load("ultralytics/yolov5", "custom",
                                   path=cfg.box_model, verbose=False)
        except Exception as exc:  # hub raises a grab-bag of types
            raise ModelLoadError(f"cannot load {cfg.box_model}: {exc}") from exc
        _YOLO_CACHE[cfg.box_model] = model
    results = model(image)
    names = {n.lower() for n in cfg.box_class_names}
    boxes = []
    for x0, y0, x1, y1, conf, cls in results.xyxy[0].tolist():
        if results.names[int(cls)].lower() not in names:
            continue
        if conf < cfg.confidence_threshold:
            continue
        boxes.append({"bbox": [x0, y0, x1, y1], "confidence": float(conf)})
    return boxes


def detect_boxes(image_path: str, cfg: AdapterConfig):
    """Stair boxes for one image, as {"bbox", "confidence"} dicts in
    full-image pixels."""
    image = read_image(image_path)
    if cfg.box_backend == "edges":
        return _edge_density_boxes(image, cfg)
    return _yolov5_boxes(image, cfg)
