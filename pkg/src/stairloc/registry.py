"""Stair roadmap-node lifecycle: cluster pose candidates, publish a node
once a cluster's statistics settle, and suppress duplicates near nodes
already published.

The registry is odometry-agnostic: callers submit poses already expressed
in the planner's world frame.  Mutations must come from a single writer;
nodes() snapshots are safe to read concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .localizer import StairPose
from .segments import fold_angle


@dataclass(frozen=True)
class RegistryConfig:
    window: int = 10  # candidates needed before gating
    sigma_pos: float = 0.2  # meters
    sigma_theta: float = math.radians(5.0)
    rejection_radius: float = 1.5  # meters, ground-plane distance
    staleness: float = 30.0  # seconds

    def __post_init__(self):
        if self.window < 2:
            raise SpecError(f"window must be >= 2, got {self.window}")
        if min(self.sigma_pos, self.sigma_theta, self.rejection_radius,
               self.staleness) <= 0:
            raise SpecError("all registry thresholds must be > 0")


@dataclass(frozen=True)
class StairCandidate:
    pose: StairPose
    timestamp: float
    frame: str = ""


@dataclass(frozen=True)
class StairNode:
    node_id: int
    position: np.ndarray  # (3,)
    angle: float
    direction: str
    n_candidates: int
    sigma_pos: float
    sigma_theta: float


@dataclass
class SubmitEvent:
    kind: str  # "none" | "published" | "suppressed"
    node: StairNode | None = None
    node_id: int | None = None


def _ground_distance(a, b) -> float:
    # gravity along +Y: ground plane is (x, z)
    return math.hypot(a[0] - b[0], a[2] - b[2])


def _circular_mean_pi(angles) -> float:
    doubled = np.array([2.0 * fold_angle(a) for a in angles])
    return fold_angle(math.atan2(np.sin(doubled).mean(), np.cos(doubled).mean()) / 2.0)


def _angle_sigma_pi(angles) -> float:
    """Sample standard deviation of undirected angles (period pi), taken
    around their circular mean via minimal signed differences."""
    mean = _circular_mean_pi(angles)
    devs = []
    for a in angles:
        d = fold_angle(a) - mean
        if d >= math.pi / 2:
            d -= math.pi
        elif d < -math.pi / 2:
            d += math.pi
        devs.append(d)
    devs = np.array(devs)
    if len(devs) < 2:
        return 0.0
    return float(np.sqrt(np.sum((devs - devs.mean()) ** 2) / (len(devs) - 1)))


def _position_sigma(positions: np.ndarray) -> float:
    """RMS scatter around the mean: sqrt of the trace of the sample
    covariance."""
    if len(positions) < 2:
        return 0.0
    centered = positions - positions.mean(axis=0)
    return float(np.sqrt(np.sum(centered ** 2) / (len(positions) - 1)))


class _Cluster:
    def __init__(self):
        self.candidates = []

    def centroid(self) -> np.ndarray:
        return np.mean([c.pose.position for c in self.candidates], axis=0)


class StairRegistry:
    """Stateful cluster/publish registry for stair pose candidates."""

    def __init__(self, config: RegistryConfig = RegistryConfig()):
        self.config = config
        self._clusters = []
        self._nodes = []
        self._next_id = 0

    def nodes(self):
        """Published nodes in publication order (snapshot)."""
        return list(self._nodes)

    def submit(self, candidate: StairCandidate) -> SubmitEvent:
        """Feed one candidate; may publish a node or report suppression.

        A candidate within the rejection radius of a published node is
        suppressed.  Otherwise it joins the nearest cluster within the
        radius (or starts a new one); when a cluster holds `window`
        fresh candidates whose position and angle scatter pass the gates,
        a node is published once and the cluster retires.
        """
        cfg = self.config
        pos = candidate.pose.position

        for node in self._nodes:
            if _ground_distance(pos, node.position) <= cfg.rejection_radius:
                return SubmitEvent(kind="suppressed", node_id=node.node_id)

        self._evict_stale(candidate.timestamp)

        best = None
        best_dist = cfg.rejection_radius
        for cluster in self._clusters:
            d = _ground_distance(pos, cluster.centroid())
            if d <= best_dist:
                best = cluster
                best_dist = d
        if best is None:
            best = _Cluster()
            self._clusters.append(best)
        best.candidates.append(candidate)

        if len(best.candidates) >= cfg.window:
            window = best.candidates[-cfg.window:]
            positions = np.array([c.pose.position for c in window])
            angles = [c.pose.angle for c in window]
            sigma_pos = _position_sigma(positions)
            sigma_theta = _angle_sigma_pi(angles)
            if sigma_pos <= cfg.sigma_pos and sigma_theta <= cfg.sigma_theta:
                mean_pos = positions.mean(axis=0)
                # a drifting cluster mean may still land near an existing
                # node; suppress instead of violating the spacing invariant
                for node in self._nodes:
                    if _ground_distance(mean_pos, node.position) <= cfg.rejection_radius:
                        self._clusters.remove(best)
                        return SubmitEvent(kind="suppressed", node_id=node.node_id)
                directions = [c.pose.direction for c in window]
                node = StairNode(
                    node_id=self._next_id,
                    position=mean_pos,
                    angle=_circular_mean_pi(angles),
                    direction=max(set(directions), key=directions.count),
                    n_candidates=len(window),
                    sigma_pos=sigma_pos,
                    sigma_theta=sigma_theta,
                )
                self._next_id += 1
                self._nodes.append(node)
                self._clusters.remove(best)
                return SubmitEvent(kind="published", node=node)
        return SubmitEvent(kind="none")

    def _evict_stale(self, now: float):
        horizon = self.config.staleness
        for cluster in self._clusters:
            cluster.candidates = [
                c for c in cluster.candidates if now - c.timestamp <= horizon
            ]
        self._clusters = [c for c in self._clusters if c.candidates]
