"""Tri-point line segments, slope angles, rasterization, and the
slope-consensus RANSAC that keeps only the parallel nosing lines.

A segment is stored as a root pixel plus two displacement vectors; the
derived endpoints are root + d_start and root + d_end.  Slopes are
compared as folded angles with period pi (a line has no direction), which
stays bounded for near-vertical segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateSegment, EmptyInput, InsufficientConsensus


@dataclass(frozen=True)
class LineSegmentTP:
    """Line segment in tri-point form: root pixel + start/end displacements."""

    root: tuple  # (u, v)
    d_start: tuple  # (du, dv)
    d_end: tuple  # (du, dv)
    score: float = 1.0

    @property
    def start(self):
        return (self.root[0] + self.d_start[0], self.root[1] + self.d_start[1])

    @property
    def end(self):
        return (self.root[0] + self.d_end[0], self.root[1] + self.d_end[1])

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


def from_endpoints(start, end, score: float = 1.0) -> LineSegmentTP:
    """Build a TP segment rooted at the midpoint of (start, end)."""
    root = ((start[0] + end[0]) / 2.0, (start[1] + end[1]) / 2.0)
    return LineSegmentTP(
        root=root,
        d_start=(start[0] - root[0], start[1] - root[1]),
        d_end=(end[0] - root[0], end[1] - root[1]),
        score=score,
    )


@dataclass(frozen=True)
class SegmentSet:
    """Ordered segments plus the crop origin that maps them back to the
    full image.  offset == (0, 0) means full-frame coordinates."""

    segments: tuple = ()
    offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)


def tp_to_endpoints(seg: LineSegmentTP):
    """Derived (start, end) pixels; DegenerateSegment on a sub-pixel span."""
    start, end = seg.start, seg.end
    if math.hypot(end[0] - start[0], end[1] - start[1]) < 1.0:
        raise DegenerateSegment(f"endpoints {start} and {end} coincide after rounding")
    return start, end


def fold_angle(angle: float) -> float:
    """Fold an angle into [-pi/2, pi/2) (undirected line)."""
    folded = math.fmod(angle + math.pi / 2.0, math.pi)
    if folded < 0:
        folded += math.pi
    return folded - math.pi / 2.0


def angular_distance(a: float, b: float) -> float:
    """Distance between two undirected-line angles, modulo pi."""
    d = abs(fold_angle(a) - fold_angle(b))
    return min(d, math.pi - d)


def slope_angle(seg: LineSegmentTP) -> float:
    """Undirected slope angle in [-pi/2, pi/2)."""
    start, end = tp_to_endpoints(seg)
    return fold_angle(math.atan2(end[1] - start[1], end[0] - start[0]))


def drop_short(segset: SegmentSet, min_length: float) -> SegmentSet:
    """Remove segments shorter than min_length pixels (unreliable slope)."""
    kept = tuple(s for s in segset.segments if s.length >= min_length)
    return replace(segset, segments=kept)


def consensus_angles(angles, tol: float, min_inlier_frac: float, rng,
                     max_iterations: int = 200, confidence: float = 0.99):
    """Single-sample RANSAC over undirected angles.

    Each candidate model is one member's angle; inliers lie within tol
    (mod pi).  Samples a seeded permutation (no replacement, so small
    inputs are searched exhaustively) with adaptive early stopping.
    Returns a boolean inlier mask; raises InsufficientConsensus when the
    best model's inlier fraction falls short.
    """
    angles = np.asarray([fold_angle(a) for a in angles], dtype=float)
    n = len(angles)
    if n == 0:
        raise EmptyInput("no angles to filter")

    def inlier_mask(model):
        d = np.abs(angles - model)
        d = np.minimum(d, math.pi - d)
        return d <= tol

    order = rng.permutation(n)
    best_mask = None
    best_count = -1
    needed = max_iterations
    for i, idx in enumerate(order[:max_iterations]):
        mask = inlier_mask(angles[idx])
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            w = count / n
            if w >= 1.0:
                break
            # adaptive iteration count at the given confidence
            needed = math.ceil(math.log(1.0 - confidence) / math.log(1.0 - w))
        if i + 1 >= min(needed, max_iterations):
            break

    if best_count < min_inlier_frac * n:
        raise InsufficientConsensus(
            f"best consensus {best_count}/{n} below fraction {min_inlier_frac}"
        )
    return best_mask


def ransac_parallel_filter(segset: SegmentSet, tol: float = 0.05,
                           min_inlier_frac: float = 0.5, iterations: int = 200,
                           rng_seed: int = 0):
    """Split a segment set into slope-consistent inliers and outliers.

    Deterministic for a fixed seed.  Raises InsufficientConsensus when no
    slope reaches the inlier fraction (majority-parallel hypothesis
    violated; the frame is rejected upstream), EmptyInput on an empty set.
    """
    if len(segset) == 0:
        raise EmptyInput("empty segment set")
    if not (0 < min_inlier_frac <= 1):
        raise ValueError(f"min_inlier_frac must be in (0, 1], got {min_inlier_frac}")
    rng = np.random.default_rng(rng_seed)
    angles = [slope_angle(s) for s in segset.segments]
    mask = consensus_angles(angles, tol, min_inlier_frac, rng, max_iterations=iterations)
    inliers = tuple(s for s, m in zip(segset.segments, mask) if m)
    outliers = tuple(s for s, m in zip(segset.segments, mask) if not m)
    return (replace(segset, segments=inliers), replace(segset, segments=outliers))


def rasterize(seg: LineSegmentTP, offset=(0.0, 0.0), bounds=None):
    """Grid pixels along the segment, 8-connected, endpoints included.

    The offset is applied before traversal; bounds is (width, height) and
    clips the result (possibly to an empty list).  No duplicates.
    """
    start, end = tp_to_endpoints(seg)
    u0, v0 = start[0] + offset[0], start[1] + offset[1]
    u1, v1 = end[0] + offset[0], end[1] + offset[1]
    steps = max(1, int(math.ceil(max(abs(u1 - u0), abs(v1 - v0)))))
    ts = np.linspace(0.0, 1.0, steps + 1)
    us = np.rint(u0 + ts * (u1 - u0)).astype(int)
    vs = np.rint(v0 + ts * (v1 - v0)).astype(int)
    pixels = []
    seen = set()
    for u, v in zip(us, vs):
        key = (int(u), int(v))
        if key in seen:
            continue
        seen.add(key)
        if bounds is not None:
            w, h = bounds
            if not (0 <= key[0] < w and 0 <= key[1] < h):
                continue
        pixels.append(key)
    return pixels
