"""Adapter failure modes."""


class AdapterError(Exception):
    """Base class for adapter failures."""


class ModelLoadError(AdapterError):
    """A detection backend could not be constructed or its weights loaded."""


class ImageReadError(AdapterError):
    """An input image could not be read or decoded."""


class ConfigError(AdapterError):
    """Adapter configuration is invalid."""
