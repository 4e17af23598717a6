"""Pinhole camera model: pixel <-> 3D point mappings and depth-raster access.

Conventions: camera frame is X-right, Y-down, Z-forward; pixels carry
real-valued coordinates and are rounded to the integer grid only when
indexing a raster.  Depth samples <= 0 or non-finite mean "no return".
"""

from __future__ import annotations

import re
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth, OutOfBounds, SpecError


@dataclass(frozen=True)
class Intrinsics:
    """Focal lengths and principal point of a zero-skew pinhole camera."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise SpecError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise SpecError(f"image size must be >= 1, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise SpecError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=float,
        )

    def inverse_matrix(self) -> np.ndarray:
        # closed form: diagonal focal inverse, shifted principal point
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ],
            dtype=float,
        )

    def contains(self, u, v) -> bool:
        """True if the rounded pixel lies inside the image rectangle."""
        ui, vi = int(round(u)), int(round(v))
        return 0 <= ui < self.width and 0 <= vi < self.height


def project(point: np.ndarray, intrinsics: Intrinsics):
    """Project a camera-frame 3D point to a pixel and its depth.

    Returns ((u, v), depth).  The pixel may fall outside the image
    rectangle; callers filter.  Raises NonPositiveDepth for z <= 0.
    """
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    if not z > 0:
        raise NonPositiveDepth(f"cannot project point with z={z}")
    u = intrinsics.fx * x / z + intrinsics.cx
    v = intrinsics.fy * y / z + intrinsics.cy
    return (u, v), z


def unproject(pixel, depth: float, intrinsics: Intrinsics) -> np.ndarray:
    """Lift a pixel with known depth back to a camera-frame 3D point."""
    if not depth > 0:
        raise NonPositiveDepth(f"cannot unproject with depth {depth}")
    u, v = float(pixel[0]), float(pixel[1])
    if not (np.isfinite(u) and np.isfinite(v)):
        raise SpecError(f"non-finite pixel ({u}, {v})")
    x = depth * (u - intrinsics.cx) / intrinsics.fx
    y = depth * (v - intrinsics.cy) / intrinsics.fy
    return np.array([x, y, depth], dtype=float)


def unproject_many(us: np.ndarray, vs: np.ndarray, depths: np.ndarray,
                   intrinsics: Intrinsics) -> np.ndarray:
    """Vectorized unprojection; returns an (n, 3) array."""
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    depths = np.asarray(depths, dtype=float)
    xs = depths * (us - intrinsics.cx) / intrinsics.fx
    ys = depths * (vs - intrinsics.cy) / intrinsics.fy
    return np.stack([xs, ys, depths], axis=-1)


@dataclass(frozen=True)
class DepthFrame:
    """Registered depth raster in meters, row-major, aligned to the color image."""

    width: int
    height: int
    data: np.ndarray = field(repr=False)  # (height, width) float array

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.shape != (self.height, self.width):
            raise SpecError(
                f"depth data shape {arr.shape} does not match "
                f"{self.height}x{self.width}"
            )
        object.__setattr__(self, "data", arr)

    def depth_at(self, pixel):
        """Depth at the rounded pixel, or None when the sample is invalid.

        Raises OutOfBounds when the rounded pixel leaves the raster.
        """
        ui, vi = int(round(pixel[0])), int(round(pixel[1]))
        if not (0 <= ui < self.width and 0 <= vi < self.height):
            raise OutOfBounds(f"pixel ({ui}, {vi}) outside {self.width}x{self.height}")
        d = float(self.data[vi, ui])
        if d > 0 and np.isfinite(d):
            return d
        return None


# --- on-disk formats -------------------------------------------------------

def write_pfm(path, frame: DepthFrame):
    """Write a greyscale PFM (little-endian, scale -1.0) in meters.

    PFM stores rows bottom-to-top; invalid samples are written as 0.
    """
    data = np.nan_to_num(frame.data, nan=0.0, posinf=0.0, neginf=0.0)
    data = np.where(data > 0, data, 0.0).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{frame.width} {frame.height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(data).tobytes())


def read_pfm(path) -> DepthFrame:
    """Read a greyscale PFM written by write_pfm (or any Pf raster in meters)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise SpecError(f"not a greyscale PFM: header {header!r}")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        endian = "<" if scale < 0 else ">"
        raw = f.read(width * height * 4)
        if len(raw) != width * height * 4:
            raise SpecError("truncated PFM payload")
        data = np.frombuffer(raw, dtype=endian + "f4").reshape(height, width)
    return DepthFrame(width=width, height=height, data=np.flipud(data).astype(float))


_INTRINSICS_FIELDS = ("fx", "fy", "cx", "cy", "width", "height")


def write_intrinsics(path, intrinsics: Intrinsics):
    with open(path, "w") as f:
        for name in _INTRINSICS_FIELDS:
            f.write(f"{name} = {getattr(intrinsics, name)!r}\n")


def read_intrinsics(path) -> Intrinsics:
    """Parse a key-value intrinsics file; unknown distortion fields are
    ignored with a warning (zero-distortion pinhole assumed)."""
    values = {}
    extras = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            m = re.match(r"(\w+)\s*[:=]\s*(\S+)", line)
            if m is None:
                raise SpecError(f"{path}:{lineno}: cannot parse {line!r}")
            key, value = m.group(1), m.group(2)
            if key in _INTRINSICS_FIELDS:
                values[key] = float(value)
            else:
                extras.append(key)
    if extras:
        warnings.warn(f"ignoring non-pinhole intrinsics fields: {sorted(set(extras))}")
    missing = [k for k in _INTRINSICS_FIELDS if k not in values]
    if missing:
        raise SpecError(f"intrinsics file missing fields: {missing}")
    return Intrinsics(
        fx=values["fx"], fy=values["fy"], cx=values["cx"], cy=values["cy"],
        width=int(values["width"]), height=int(values["height"]),
    )
