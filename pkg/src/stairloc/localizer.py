"""Stair localization: lift slope-consistent segments to 3D through the
depth raster, average them into a stair position, fit ground-projected
lines, and derive the stair angle, orientation quaternion, and up/down
direction.

All operations are pure; per-box failures inside localize() become
diagnostics rather than exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import segments as seglib
from .camera import DepthFrame, Intrinsics, unproject_many
from .detection import FrameBundle, crop_roi, to_full_frame
from .errors import (
    AllRejected,
    DegenerateCluster,
    EmptyCloud,
    EmptyInput,
    InsufficientConsensus,
    NoValidDepth,
    SpecError,
    StairlocError,
    TooFewPoints,
)
from .segments import SegmentSet, angular_distance, fold_angle

DIRECTION_UP = "up"
DIRECTION_DOWN = "down"
DIRECTION_AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class ExtrinsicsConfig:
    """Camera-to-base rigid transform, gravity axis, and the direction
    threshold epsilon (meters).

    Defaults: identity rotation, camera 0.5 m above the base origin
    (translation in the Y-down base frame), gravity along +Y (down).
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.array([0.0, -0.5, 0.0]))
    gravity_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    epsilon: float = 0.15

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3) or np.abs(rot @ rot.T - np.eye(3)).max() > 1e-9:
            raise SpecError("rotation must be orthonormal within 1e-9")
        g = np.asarray(self.gravity_axis, dtype=float)
        norm = np.linalg.norm(g)
        if norm == 0:
            raise SpecError("gravity axis must be nonzero")
        if self.epsilon <= 0:
            raise SpecError(f"epsilon must be > 0, got {self.epsilon}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        object.__setattr__(self, "gravity_axis", g / norm)

    def ground_basis(self) -> np.ndarray:
        """(2, 3) orthonormal basis spanning the ground plane.

        Chosen so the default gravity (+Y down) yields pi(P) = [x, z]."""
        g = self.gravity_axis
        seed = np.array([1.0, 0.0, 0.0])
        e1 = seed - (seed @ g) * g
        if np.linalg.norm(e1) < 1e-9:
            seed = np.array([0.0, 0.0, 1.0])
            e1 = seed - (seed @ g) * g
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(e1, g)
        return np.stack([e1, e2])


@dataclass(frozen=True)
class LiftedSegment:
    """3D points sampled along one image segment through the depth raster."""

    source_index: int
    points: np.ndarray  # (n, 3)
    valid_fraction: float


@dataclass(frozen=True)
class GroundLine:
    """Total-least-squares line fitted to one segment's ground projection."""

    angle: float  # [-pi/2, pi/2)
    centroid: np.ndarray  # (2,)
    residual_mse: float
    support: int


@dataclass(frozen=True)
class StairPose:
    position: np.ndarray  # (3,) camera frame
    angle: float  # [-pi, pi)
    quaternion: np.ndarray  # (4,) (w, x, y, z), unit
    height: float  # meters relative to the base origin
    direction: str
    n_points: int
    n_lines: int
    residual_mse: float

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise SpecError(f"quaternion norm {np.linalg.norm(q)} not 1 within 1e-9")
        if not (-math.pi <= self.angle < math.pi):
            raise SpecError(f"angle {self.angle} outside [-pi, pi)")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "quaternion", q)


@dataclass(frozen=True)
class LocalizeParams:
    min_seg_length: float = 10.0
    slope_tol: float = 0.05
    min_inlier_frac: float = 0.5
    ransac_iterations: int = 200
    min_points: int = 5
    residual_tol: float = 0.005  # m^2, per-line gate
    line_angle_tol: float = 0.1
    line_min_inlier_frac: float = 0.5
    point_level_ransac: bool = False
    point_inlier_tol: float = 0.05  # meters, only with point_level_ransac
    seed: int = 0


def lift_segments(segset: SegmentSet, depth: DepthFrame, intrinsics: Intrinsics,
                  min_points: int = 5):
    """Unproject each segment's rasterized pixels with valid depth.

    Segments retaining fewer than min_points samples are dropped; if all
    drop, NoValidDepth rejects the frame.  Input must be full-frame.
    """
    bounds = (intrinsics.width, intrinsics.height)
    lifted = []
    dropped = 0
    for index, seg in enumerate(segset.segments):
        pixels = seglib.rasterize(seg, offset=segset.offset, bounds=bounds)
        if not pixels:
            dropped += 1
            continue
        us, vs, ds = [], [], []
        for u, v in pixels:
            d = depth.depth_at((u, v))
            if d is not None:
                us.append(u)
                vs.append(v)
                ds.append(d)
        if len(ds) < min_points:
            dropped += 1
            continue
        points = unproject_many(np.array(us, dtype=float), np.array(vs, dtype=float),
                                np.array(ds, dtype=float), intrinsics)
        lifted.append(LiftedSegment(
            source_index=index,
            points=points,
            valid_fraction=len(ds) / len(pixels),
        ))
    if not lifted:
        raise NoValidDepth(
            f"all {len(segset.segments)} segments lost depth support "
            f"({dropped} dropped)"
        )
    return lifted


def estimate_position(lifted) -> np.ndarray:
    """Component-wise mean over every lifted point (stair position)."""
    if not lifted:
        raise EmptyCloud("no lifted segments")
    points = np.concatenate([seg.points for seg in lifted])
    if points.size == 0:
        raise EmptyCloud("lifted segments carry no points")
    return points.mean(axis=0)


def ground_project(point: np.ndarray, cfg: ExtrinsicsConfig) -> np.ndarray:
    """Drop the gravity-parallel component; default gravity gives [x, z]."""
    return cfg.ground_basis() @ np.asarray(point, dtype=float)


def ground_project_many(points: np.ndarray, cfg: ExtrinsicsConfig) -> np.ndarray:
    return np.asarray(points, dtype=float) @ cfg.ground_basis().T


def _tls_fit(points2d: np.ndarray) -> GroundLine:
    n = len(points2d)
    centroid = points2d.mean(axis=0)
    centered = points2d - centroid
    scatter = centered.T @ centered
    if np.abs(scatter).max() < 1e-18:
        raise DegenerateCluster(f"{n} coincident points")
    eigvals, eigvecs = np.linalg.eigh(scatter)
    direction = eigvecs[:, 1]  # principal axis
    angle = fold_angle(math.atan2(direction[1], direction[0]))
    residual_mse = float(eigvals[0]) / n
    return GroundLine(angle=angle, centroid=centroid,
                      residual_mse=max(residual_mse, 0.0), support=n)


def fit_ground_line(points2d, inlier_tol: float | None = None,
                    rng_seed: int = 0) -> GroundLine:
    """Total-least-squares ground line (perpendicular residuals).

    With inlier_tol set, a per-point RANSAC pass selects the largest
    subset within that perpendicular distance before the final fit.
    """
    points2d = np.asarray(points2d, dtype=float)
    if len(points2d) < 2:
        raise TooFewPoints(f"need >= 2 points, got {len(points2d)}")
    if inlier_tol is None:
        return _tls_fit(points2d)

    rng = np.random.default_rng(rng_seed)
    n = len(points2d)
    best_mask = None
    best_count = -1
    for _ in range(min(100, n * (n - 1))):
        i, j = rng.choice(n, size=2, replace=False)
        d = points2d[j] - points2d[i]
        norm = np.linalg.norm(d)
        if norm < 1e-12:
            continue
        normal = np.array([-d[1], d[0]]) / norm
        dist = np.abs((points2d - points2d[i]) @ normal)
        mask = dist <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count < 2:
        raise DegenerateCluster("no 2-point model found")
    return _tls_fit(points2d[best_mask])


def filter_ground_lines(lines, residual_tol: float, angle_tol: float = 0.1,
                        min_inlier_frac: float = 0.5, rng_seed: int = 0):
    """Reject noisy ground lines, then keep the majority-angle group.

    Lines with residual MSE above residual_tol fall to the residual gate;
    the survivors go through the same folded-angle consensus as the image
    segments.  AllRejected rejects the frame when nothing survives.
    """
    lines = list(lines)
    if not lines:
        raise EmptyInput("no ground lines")
    clean = [l for l in lines if l.residual_mse <= residual_tol]
    noisy = [l for l in lines if l.residual_mse > residual_tol]
    if not clean:
        raise AllRejected(f"all {len(lines)} lines exceed residual tol {residual_tol}")
    rng = np.random.default_rng(rng_seed)
    try:
        mask = seglib.consensus_angles([l.angle for l in clean], angle_tol,
                                       min_inlier_frac, rng)
    except InsufficientConsensus as exc:
        raise AllRejected(f"no angular consensus among ground lines: {exc}") from exc
    kept = [l for l, m in zip(clean, mask) if m]
    rejected = noisy + [l for l, m in zip(clean, mask) if not m]
    return kept, rejected


def estimate_angle(kept) -> float:
    """Stair angle in [-pi, pi): period-pi circular mean of the kept line
    angles, unfolded by orienting the stair ascent away from the camera.

    Coincides with the plain arithmetic mean whenever no wrap occurs.
    """
    kept = list(kept)
    if not kept:
        raise EmptyInput("no kept ground lines")
    doubled = np.array([2.0 * l.angle for l in kept])
    mean_dir = math.atan2(np.sin(doubled).mean(), np.cos(doubled).mean())
    folded = fold_angle(mean_dir / 2.0)
    # ascent candidate (-sin, cos); true ascent points away from the camera
    centroid = np.mean([l.centroid for l in kept], axis=0)
    ascent = np.array([-math.sin(folded), math.cos(folded)])
    if ascent @ centroid >= 0:
        return folded
    unfolded = folded + math.pi
    if unfolded >= math.pi:
        unfolded -= 2.0 * math.pi
    return unfolded


def angle_to_quaternion(angle: float, cfg: ExtrinsicsConfig) -> np.ndarray:
    """Unit quaternion (w, x, y, z) rotating by angle about the gravity axis."""
    half = angle / 2.0
    q = np.empty(4)
    q[0] = math.cos(half)
    q[1:] = math.sin(half) * cfg.gravity_axis
    return q / np.linalg.norm(q)


def quaternion_yaw(q: np.ndarray, cfg: ExtrinsicsConfig) -> float:
    """Rotation angle of q about the gravity axis (inverse of
    angle_to_quaternion for angles in [-pi, pi))."""
    yaw = 2.0 * math.atan2(float(np.asarray(q)[1:] @ cfg.gravity_axis), float(q[0]))
    if yaw >= math.pi:
        yaw -= 2.0 * math.pi
    elif yaw < -math.pi:
        yaw += 2.0 * math.pi
    return yaw


def estimate_direction(position: np.ndarray, cfg: ExtrinsicsConfig):
    """Relative stair height over the base origin and the up/down call."""
    base_point = cfg.rotation @ np.asarray(position, dtype=float) + cfg.translation
    height = -float(base_point @ cfg.gravity_axis)  # gravity points down
    if height > cfg.epsilon:
        return height, DIRECTION_UP
    if height < -cfg.epsilon:
        return height, DIRECTION_DOWN
    return height, DIRECTION_AMBIGUOUS


@dataclass(frozen=True)
class BoxResult:
    """Per-box outcome inside a localized frame (for overlays/diagnostics)."""

    box_index: int
    pose: StairPose | None
    inliers: SegmentSet | None = None  # full-frame coordinates
    outliers: SegmentSet | None = None
    error: str | None = None
    message: str = ""


@dataclass(frozen=True)
class LocalizeResult:
    frame: str
    boxes: tuple = ()

    @property
    def poses(self):
        return [(b.box_index, b.pose) for b in self.boxes if b.pose is not None]

    @property
    def diagnostics(self):
        return [
            {"box_index": b.box_index, "error": b.error, "message": b.message}
            for b in self.boxes
            if b.error is not None
        ]


def _localize_box(detection, bundle: FrameBundle, cfg: ExtrinsicsConfig,
                  params: LocalizeParams):
    image_rect = (bundle.intrinsics.width, bundle.intrinsics.height)
    crop_roi(detection.box, image_rect)  # validates the box against the image
    segset = seglib.drop_short(detection.segments, params.min_seg_length)
    inliers, outliers = seglib.ransac_parallel_filter(
        segset, tol=params.slope_tol, min_inlier_frac=params.min_inlier_frac,
        iterations=params.ransac_iterations, rng_seed=params.seed,
    )
    inliers_full = to_full_frame(inliers, image_rect)
    outliers_full = to_full_frame(outliers, image_rect)

    lifted = lift_segments(inliers_full, bundle.depth, bundle.intrinsics,
                           min_points=params.min_points)
    position = estimate_position(lifted)

    lines = []
    for seg in lifted:
        projected = ground_project_many(seg.points, cfg)
        tol = params.point_inlier_tol if params.point_level_ransac else None
        try:
            lines.append(fit_ground_line(projected, inlier_tol=tol,
                                         rng_seed=params.seed))
        except (TooFewPoints, DegenerateCluster):
            continue
    if not lines:
        raise AllRejected("no segment yielded a ground line")
    kept, _rejected = filter_ground_lines(
        lines, residual_tol=params.residual_tol, angle_tol=params.line_angle_tol,
        min_inlier_frac=params.line_min_inlier_frac, rng_seed=params.seed,
    )
    angle = estimate_angle(kept)
    quaternion = angle_to_quaternion(angle, cfg)
    height, direction = estimate_direction(position, cfg)
    pose = StairPose(
        position=position,
        angle=angle,
        quaternion=quaternion,
        height=height,
        direction=direction,
        n_points=int(sum(len(seg.points) for seg in lifted)),
        n_lines=len(kept),
        residual_mse=float(np.mean([l.residual_mse for l in kept])),
    )
    return pose, inliers_full, outliers_full


def localize(bundle: FrameBundle, cfg: ExtrinsicsConfig,
             params: LocalizeParams = LocalizeParams()) -> LocalizeResult:
    """Run the full per-frame cascade over every detected box.

    Per-box frame-rejection errors become diagnostics; only a malformed
    bundle raises.  Deterministic for fixed (bundle, cfg, params).
    """
    results = []
    for box_index, detection in enumerate(bundle.record.detections):
        try:
            pose, inl, outl = _localize_box(detection, bundle, cfg, params)
            results.append(BoxResult(box_index=box_index, pose=pose,
                                     inliers=inl, outliers=outl))
        except StairlocError as exc:
            results.append(BoxResult(
                box_index=box_index, pose=None,
                error=type(exc).__name__, message=str(exc),
            ))
    return LocalizeResult(frame=bundle.record.frame, boxes=tuple(results))
