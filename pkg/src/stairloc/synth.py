"""Parametric staircase scenes: analytic depth rendering, ground-truth
nosing segments, corruption, and exact truth poses.

Staircases are axis-aligned boxes in their own frame, so each camera ray
is intersected in closed form with the tread and riser planes (nearest
hit wins); no mesh rasterizer involved.  The scene doubles as the oracle
for the localization pipeline: truth segments are the projections of the
nosing edges, and the truth position is the mean of the unprojected
nosing-pixel samples at analytic depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import DepthFrame, Intrinsics, unproject_many
from .detection import BoundingBox, BoxDetection, DetectionRecord
from .errors import NotVisible, SpecError
from .localizer import (
    DIRECTION_DOWN,
    DIRECTION_UP,
    ExtrinsicsConfig,
    StairPose,
    angle_to_quaternion,
)
from .segments import LineSegmentTP, SegmentSet, from_endpoints, rasterize

MIN_VISIBLE_FRACTION = 0.3  # of a nosing's projected length


@dataclass(frozen=True)
class StaircaseSpec:
    """Geometry and placement of a synthetic staircase.

    position is the base-front-center point at ground level in the camera
    frame (Y down); yaw rotates about the gravity axis.  direction "down"
    stacks the steps below the base point, descending away.
    """

    steps: int
    rise: float
    run: float
    width: float
    position: tuple = (0.0, 0.5, 3.0)
    yaw: float = 0.0
    direction: str = DIRECTION_UP

    def __post_init__(self):
        if self.steps < 1:
            raise SpecError(f"steps must be >= 1, got {self.steps}")
        if min(self.rise, self.run, self.width) <= 0:
            raise SpecError("rise, run, and width must be positive")
        if self.direction not in (DIRECTION_UP, DIRECTION_DOWN):
            raise SpecError(f"direction must be up or down, got {self.direction!r}")


@dataclass(frozen=True)
class CorruptionSpec:
    depth_noise: float = 0.0  # Gaussian sigma as a fraction of range
    segment_jitter: float = 0.0  # pixel sigma on endpoints
    outlier_count: int = 0
    outlier_angle_range: tuple = (0.3, 1.2)  # radians off horizontal
    dropout: float = 0.0  # fraction of depth pixels invalidated
    occluders: tuple = ()  # (u0, v0, u1, v1, depth_m) rectangles

    def __post_init__(self):
        if not 0.0 <= self.dropout <= 1.0:
            raise SpecError(f"dropout {self.dropout} outside [0, 1]")
        if self.depth_noise < 0 or self.segment_jitter < 0 or self.outlier_count < 0:
            raise SpecError("corruption magnitudes must be >= 0")

    def is_noop(self) -> bool:
        return (self.depth_noise == 0 and self.segment_jitter == 0
                and self.outlier_count == 0 and self.dropout == 0
                and not self.occluders)


@dataclass(frozen=True)
class SyntheticScene:
    spec: StaircaseSpec
    intrinsics: Intrinsics
    depth: DepthFrame
    truth_segments: SegmentSet  # full-frame, uncorrupted
    detection_segments: SegmentSet  # what the pipeline sees (may be corrupted)
    truth_pose: StairPose
    corruption_log: dict = field(default_factory=dict)


def _stair_rotation(yaw: float) -> np.ndarray:
    """Local->camera rotation: local x (nosing direction) maps to
    (cos yaw, 0, sin yaw), so the ground-projected line angle equals yaw."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _surfaces(spec: StaircaseSpec):
    """Tread and riser planes in the stair-local frame.

    Each entry: (axis, plane_value, (lo0, hi0, lo1, hi1)) where axis 1
    means a tread (y = value, bounds on x and z) and axis 2 a riser
    (z = value, bounds on x and y).  Y is down, so up-stairs stack toward
    negative y.
    """
    half_w = spec.width / 2.0
    # landing/walkway at base level in front of the stairs; without it,
    # rays grazing the first down-stair nosing punch through to the first
    # riser plane and corrupt the depth along that edge
    out = [(1, 0.0, (-half_w, half_w, -50.0, 0.0))]
    for k in range(spec.steps):
        if spec.direction == DIRECTION_UP:
            # riser k front face, then tread k top
            out.append((2, k * spec.run,
                        (-half_w, half_w, -(k + 1) * spec.rise, -k * spec.rise)))
            out.append((1, -(k + 1) * spec.rise,
                        (-half_w, half_w, k * spec.run, (k + 1) * spec.run)))
        else:
            # descent starts at the base point: riser k drops from nosing
            # k, tread k runs away one step lower
            out.append((2, k * spec.run,
                        (-half_w, half_w, k * spec.rise, (k + 1) * spec.rise)))
            out.append((1, (k + 1) * spec.rise,
                        (-half_w, half_w, k * spec.run, (k + 1) * spec.run)))
    return out


def _nosings(spec: StaircaseSpec):
    """Nosing edge endpoints in the stair-local frame, near to far."""
    half_w = spec.width / 2.0
    edges = []
    for k in range(spec.steps):
        if spec.direction == DIRECTION_UP:
            y, z = -(k + 1) * spec.rise, k * spec.run
        else:
            y, z = k * spec.rise, k * spec.run
        edges.append((np.array([-half_w, y, z]), np.array([half_w, y, z])))
    return edges


def _ray_depths(spec: StaircaseSpec, intrinsics: Intrinsics,
                us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Analytic depth (camera z, meters) of the nearest stair surface hit
    by the rays through the given pixels; NaN where the rays miss."""
    rot = _stair_rotation(spec.yaw)
    base = np.asarray(spec.position, dtype=float)
    dirs = np.stack([
        (np.asarray(us, dtype=float) - intrinsics.cx) / intrinsics.fx,
        (np.asarray(vs, dtype=float) - intrinsics.cy) / intrinsics.fy,
        np.ones_like(np.asarray(us, dtype=float)),
    ], axis=-1)
    origin_l = rot.T @ (-base)
    dirs_l = dirs @ rot  # == dirs @ rot (row vectors) -> R^T d
    best = np.full(dirs.shape[:-1], np.inf)
    for axis, value, (lo0, hi0, lo1, hi1) in _surfaces(spec):
        denom = dirs_l[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (value - origin_l[axis]) / denom
            hit = origin_l + t[..., None] * dirs_l
        other = 2 if axis == 1 else 1
        valid = (
            (t > 1e-6)
            & np.isfinite(t)
            & (hit[..., 0] >= lo0) & (hit[..., 0] <= hi0)
            & (hit[..., other] >= lo1) & (hit[..., other] <= hi1)
        )
        # ray z-component is 1, so camera depth equals t
        best = np.where(valid & (t < best), t, best)
    return np.where(np.isfinite(best), best, np.nan)


def _truth_segments(spec: StaircaseSpec, intrinsics: Intrinsics,
                    samples: int = 257) -> SegmentSet:
    """Project each nosing edge and keep its longest unoccluded in-image
    run, provided at least MIN_VISIBLE_FRACTION of the edge survives."""
    segments = []
    rot = _stair_rotation(spec.yaw)
    base = np.asarray(spec.position, dtype=float)
    for left_l, right_l in _nosings(spec):
        left = rot @ left_l + base
        right = rot @ right_l + base
        ts = np.linspace(0.0, 1.0, samples)
        points = left + ts[:, None] * (right - left)
        zs = points[:, 2]
        ahead = zs > 1e-3
        with np.errstate(divide="ignore", invalid="ignore"):
            us = intrinsics.fx * points[:, 0] / zs + intrinsics.cx
            vs = intrinsics.fy * points[:, 1] / zs + intrinsics.cy
        in_image = (
            ahead
            & (us >= 0.0) & (us <= intrinsics.width - 1.0)
            & (vs >= 0.0) & (vs <= intrinsics.height - 1.0)
        )
        hits = _ray_depths(spec, intrinsics, np.where(in_image, us, 0.0),
                           np.where(in_image, vs, 0.0))
        # unoccluded iff the nearest surface hit is the edge itself
        tol = 1e-3 * np.maximum(zs, 1.0)
        visible = in_image & np.isfinite(hits) & (np.abs(hits - zs) <= tol)
        if visible.sum() < MIN_VISIBLE_FRACTION * samples:
            continue
        # longest contiguous visible run
        best_len, best_lo = 0, 0
        lo = None
        for i, flag in enumerate(list(visible) + [False]):
            if flag and lo is None:
                lo = i
            elif not flag and lo is not None:
                if i - lo > best_len:
                    best_len, best_lo = i - lo, lo
                lo = None
        if best_len < MIN_VISIBLE_FRACTION * samples:
            continue
        a = (float(us[best_lo]), float(vs[best_lo]))
        b = (float(us[best_lo + best_len - 1]), float(vs[best_lo + best_len - 1]))
        if math.hypot(b[0] - a[0], b[1] - a[1]) < 2.0:
            continue
        segments.append(from_endpoints(a, b))
    if not segments:
        raise NotVisible("no staircase nosing projects inside the image")
    return SegmentSet(segments=tuple(segments), offset=(0.0, 0.0))


def _truth_position(spec: StaircaseSpec, intrinsics: Intrinsics,
                    segments: SegmentSet) -> np.ndarray:
    """Mean of the nosing-pixel samples at analytic depth (what a perfect
    pipeline run computes)."""
    us, vs = [], []
    for seg in segments.segments:
        for u, v in rasterize(seg, bounds=(intrinsics.width, intrinsics.height)):
            us.append(u)
            vs.append(v)
    us = np.array(us, dtype=float)
    vs = np.array(vs, dtype=float)
    depths = _ray_depths(spec, intrinsics, us, vs)
    valid = np.isfinite(depths) & (depths > 0)
    if not valid.any():
        raise NotVisible("no nosing pixel hits the staircase surface")
    points = unproject_many(us[valid], vs[valid], depths[valid], intrinsics)
    return points.mean(axis=0), int(valid.sum())


def build_scene(spec: StaircaseSpec, intrinsics: Intrinsics) -> SyntheticScene:
    """Render the depth frame and derive truth segments and pose.

    Raises NotVisible when no nosing projects into the image.
    """
    truth_segments = _truth_segments(spec, intrinsics)
    vv, uu = np.meshgrid(
        np.arange(intrinsics.height, dtype=float),
        np.arange(intrinsics.width, dtype=float),
        indexing="ij",
    )
    depths = _ray_depths(spec, intrinsics, uu, vv)
    depth = DepthFrame(
        width=intrinsics.width, height=intrinsics.height,
        data=np.where(np.isfinite(depths), depths, 0.0),
    )
    position, n_points = _truth_position(spec, intrinsics, truth_segments)
    cfg = ExtrinsicsConfig()
    angle = spec.yaw
    if not -math.pi <= angle < math.pi:
        angle = math.atan2(math.sin(angle), math.cos(angle))
    # ground level is the stair base height; height is up-positive (Y down)
    height = float(spec.position[1] - position[1])
    pose = StairPose(
        position=position,
        angle=angle,
        quaternion=angle_to_quaternion(angle, cfg),
        height=height,
        direction=spec.direction,
        n_points=n_points,
        n_lines=len(truth_segments),
        residual_mse=0.0,
    )
    return SyntheticScene(
        spec=spec,
        intrinsics=intrinsics,
        depth=depth,
        truth_segments=truth_segments,
        detection_segments=truth_segments,
        truth_pose=pose,
        corruption_log={},
    )


def truth_pose(scene: SyntheticScene) -> StairPose:
    return scene.truth_pose


def corrupt(scene: SyntheticScene, corruption: CorruptionSpec,
            rng_seed: int = 0) -> SyntheticScene:
    """Apply depth noise, dropout, occluders, segment jitter, and outlier
    segments.  Deterministic per seed; truth fields untouched.
    """
    log = {"seed": rng_seed, "spec": corruption}
    if corruption.is_noop():
        return replace(scene, corruption_log=log)
    rng = np.random.default_rng(rng_seed)
    intr = scene.intrinsics

    data = scene.depth.data.copy()
    valid = data > 0
    if corruption.depth_noise > 0:
        noise = rng.normal(0.0, 1.0, size=data.shape)
        data = np.where(valid, data * (1.0 + corruption.depth_noise * noise), data)
        data = np.where(data > 0, data, 0.0)
    if corruption.dropout > 0:
        drop = rng.random(size=data.shape) < corruption.dropout
        data = np.where(drop, 0.0, data)
    for u0, v0, u1, v1, occ_depth in corruption.occluders:
        ui0, vi0 = max(0, int(u0)), max(0, int(v0))
        ui1, vi1 = min(intr.width, int(u1)), min(intr.height, int(v1))
        data[vi0:vi1, ui0:ui1] = occ_depth

    segments = list(scene.detection_segments.segments)
    if corruption.segment_jitter > 0:
        jittered = []
        for seg in segments:
            offsets = rng.normal(0.0, corruption.segment_jitter, size=4)
            start = (seg.start[0] + offsets[0], seg.start[1] + offsets[1])
            end = (seg.end[0] + offsets[2], seg.end[1] + offsets[3])
            start = (min(max(start[0], 0.0), intr.width - 1.0),
                     min(max(start[1], 0.0), intr.height - 1.0))
            end = (min(max(end[0], 0.0), intr.width - 1.0),
                   min(max(end[1], 0.0), intr.height - 1.0))
            jittered.append(from_endpoints(start, end, score=seg.score))
        segments = jittered
    if corruption.outlier_count > 0:
        us = [pt[0] for seg in scene.truth_segments for pt in (seg.start, seg.end)]
        vs = [pt[1] for seg in scene.truth_segments for pt in (seg.start, seg.end)]
        lo_a, hi_a = corruption.outlier_angle_range
        for _ in range(corruption.outlier_count):
            cu = rng.uniform(min(us), max(us))
            cv = rng.uniform(min(vs) - 10.0, max(vs) + 10.0)
            angle = rng.uniform(lo_a, hi_a) * rng.choice([-1.0, 1.0])
            length = rng.uniform(20.0, 60.0)
            du = math.cos(angle) * length / 2.0
            dv = math.sin(angle) * length / 2.0
            start = (min(max(cu - du, 0.0), intr.width - 1.0),
                     min(max(cv - dv, 0.0), intr.height - 1.0))
            end = (min(max(cu + du, 0.0), intr.width - 1.0),
                   min(max(cv + dv, 0.0), intr.height - 1.0))
            if math.hypot(end[0] - start[0], end[1] - start[1]) < 2.0:
                continue
            segments.append(from_endpoints(start, end, score=0.5))

    return replace(
        scene,
        depth=DepthFrame(width=intr.width, height=intr.height, data=data),
        detection_segments=SegmentSet(segments=tuple(segments), offset=(0.0, 0.0)),
        corruption_log=log,
    )


def scene_detection_record(scene: SyntheticScene, frame_id: str,
                           padding: float = 5.0) -> DetectionRecord:
    """Wrap the scene's detection segments in a stairloc/1 record with a
    bounding box fitted around them (the oracle detector)."""
    intr = scene.intrinsics
    endpoints = [pt for seg in scene.detection_segments
                 for pt in (seg.start, seg.end)]
    if not endpoints:
        return DetectionRecord(frame=frame_id)
    us = [p[0] for p in endpoints]
    vs = [p[1] for p in endpoints]
    x_min = max(0.0, min(us) - padding)
    y_min = max(0.0, min(vs) - padding)
    x_max = min(float(intr.width), max(us) + padding)
    y_max = min(float(intr.height), max(vs) + padding)
    box = BoundingBox(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max,
                      confidence=1.0)
    local = tuple(
        LineSegmentTP(
            root=(seg.root[0] - x_min, seg.root[1] - y_min),
            d_start=seg.d_start, d_end=seg.d_end, score=seg.score,
        )
        for seg in scene.detection_segments
    )
    return DetectionRecord(
        frame=frame_id,
        detections=(BoxDetection(
            box=box,
            segments=SegmentSet(segments=local, offset=(x_min, y_min)),
        ),),
    )


class OracleDetector:
    """Detector backed by synthetic scenes keyed by frame id."""

    def __init__(self, scenes: dict):
        self._scenes = dict(scenes)

    def detect(self, frame_id: str) -> DetectionRecord:
        scene = self._scenes.get(frame_id)
        if scene is None:
            return DetectionRecord(frame=frame_id)
        return scene_detection_record(scene, frame_id)
