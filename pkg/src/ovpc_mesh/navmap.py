"""Map-side queries a sampling planner needs: nearest point, state projection, collisions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegeneracyError, DomainError, StateError
from .geometry import Pose3
from .traversability import NavMap

HEADING_EPS = 1e-9


def normalize_heading(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(theta, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class Se2State:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_heading(float(self.heading)))


@dataclass(frozen=True)
class RobotBox:
    length: float
    width: float
    height: float
    z_offset: float = 0.0

    def __post_init__(self):
        if min(self.length, self.width, self.height) <= 0:
            raise DomainError("box extents must be positive")

    @property
    def half_diagonal(self) -> float:
        return 0.5 * math.sqrt(self.length**2 + self.width**2 + self.height**2)


class NearestResult(NamedTuple):
    index: int
    point: np.ndarray
    normal: np.ndarray
    traversable: bool
    distance: float


class CollisionReport(NamedTuple):
    in_collision: bool
    offending_indices: np.ndarray


def nearest_visible(nav: NavMap, q) -> NearestResult:
    """Euclidean nearest map point; exact ties go to the lowest index."""
    if len(nav) == 0:
        raise StateError("navmap is empty")
    q = np.asarray(q, dtype=np.float64).reshape(3)
    d, i = nav.tree.query(q)
    # widen slightly and resolve ties on exactly recomputed distances
    cand = nav.tree.query_ball_point(q, d * (1 + 1e-9) + 1e-12)
    if cand:
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        diff = nav.points[cand] - q
        d2 = (diff * diff).sum(axis=1)
        i = int(cand[np.argmin(d2)])
    i = int(i)
    return NearestResult(i, nav.points[i], nav.normals[i], bool(nav.traversable[i]), float(np.linalg.norm(nav.points[i] - q)))


def surface_frame(normal, heading: float) -> np.ndarray:
    """Rotation whose columns are body x, y, z: z along ``normal``, x along the heading."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    h = np.array([math.cos(heading), math.sin(heading), 0.0])
    x = h - (h @ n) * n
    ln = np.linalg.norm(x)
    if ln < HEADING_EPS:
        raise DegeneracyError("heading is parallel to the surface normal; projection undefined", dimension=None)
    x /= ln
    y = np.cross(n, x)
    return np.column_stack([x, y, n])


def project_state(nav: NavMap, s: Se2State, z_ref: float) -> Pose3:
    """Place an SE(2) state on the surface at the closest visible point."""
    hit = nearest_visible(nav, (s.x, s.y, z_ref))
    return Pose3.from_matrix(surface_frame(hit.normal, s.heading), hit.point)


def box_local(points: np.ndarray, pose: Pose3) -> np.ndarray:
    """Coordinates of ``points`` in the pose frame, ``R^T (p - t)`` written out per axis."""
    r = pose.matrix
    d = points - pose.translation
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    return np.column_stack(
        [
            dx * r[0, 0] + dy * r[1, 0] + dz * r[2, 0],
            dx * r[0, 1] + dy * r[1, 1] + dz * r[2, 1],
            dx * r[0, 2] + dy * r[1, 2] + dz * r[2, 2],
        ]
    )


def in_box(local: np.ndarray, box: RobotBox) -> np.ndarray:
    hl, hw = box.length / 2, box.width / 2
    return (
        (local[:, 0] >= -hl)
        & (local[:, 0] <= hl)
        & (local[:, 1] >= -hw)
        & (local[:, 1] <= hw)
        & (local[:, 2] >= box.z_offset)
        & (local[:, 2] <= box.z_offset + box.height)
    )


def collision_check(nav: NavMap, pose: Pose3, box: RobotBox) -> CollisionReport:
    """Non-traversable map points inside the pose-aligned robot box.

    Traversable points are the support surface and never collide.
    """
    if len(nav) == 0:
        return CollisionReport(False, np.zeros(0, dtype=np.int64))
    centre = pose.apply(np.array([0.0, 0.0, box.z_offset + box.height / 2]))[0]
    radius = box.half_diagonal * (1 + 1e-9) + 1e-9
    cand = np.sort(np.asarray(nav.tree.query_ball_point(centre, radius), dtype=np.int64))
    cand = cand[~nav.traversable[cand]]
    hits = cand[in_box(box_local(nav.points[cand], pose), box)] if cand.size else cand
    return CollisionReport(bool(hits.size), hits)
