"""Adapters that turn off-the-shelf detector outputs into the stairloc/1
detection wire format."""

from .boxes import detect_boxes
from .config import AdapterConfig, load_config
from .emit import emit_records, record_for_image
from .errors import AdapterError, ConfigError, ImageReadError, ModelLoadError
from .segments import detect_segments, rescale_point, segment_to_tp

__all__ = [
    "AdapterConfig", "load_config",
    "detect_boxes", "detect_segments", "rescale_point", "segment_to_tp",
    "emit_records", "record_for_image",
    "AdapterError", "ConfigError", "ImageReadError", "ModelLoadError",
]

__version__ = "0.1.0"
