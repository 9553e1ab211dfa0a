"""Core geometric value types and topology utilities.

Conventions: right-handed frame, z up, gravity along -z. Points are stored as
``(n, 3)`` float64 arrays; quaternions are ``(w, x, y, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, DomainError, StructuralError

QUAT_NORM_TOL = 1e-9


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DataError(f"expected an (n, 3) point array, got shape {arr.shape}")
    return arr


def check_finite(points: np.ndarray) -> None:
    """Raise :class:`DataError` naming the first point with a NaN/Inf coordinate."""
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f"non-finite coordinate at point index {i}: {points[i].tolist()}")


def unit(v, axis=-1) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    intensity: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = as_points(self.points)
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise DataError(
                    f"intensity has {inten.shape[0]} values for {pts.shape[0]} points"
                )
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, index) -> "PointCloud":
        inten = None if self.intensity is None else self.intensity[index]
        return PointCloud(self.points[index], inten)

    def finite(self) -> "PointCloud":
        """Drop points with any non-finite coordinate (ingestion filter)."""
        keep = np.isfinite(self.points).all(axis=1)
        if self.intensity is not None:
            keep &= np.isfinite(self.intensity)
        return self if keep.all() else self.subset(keep)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method), ``w >= 0``."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


@dataclass(frozen=True)
class Pose3:
    """Rigid transform ``p -> R p + t`` with ``R`` given as a unit quaternion."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        if not (np.isfinite(t).all() and np.isfinite(q).all()):
            raise DomainError("pose contains non-finite values")
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            raise DomainError(f"quaternion norm {np.linalg.norm(q)!r} is not 1")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)

    @classmethod
    def identity(cls) -> "Pose3":
        return cls()

    @classmethod
    def from_matrix(cls, rot, translation=(0.0, 0.0, 0.0)) -> "Pose3":
        return cls(np.asarray(translation, dtype=np.float64), matrix_to_quat(rot))

    @classmethod
    def from_euler(cls, roll=0.0, pitch=0.0, yaw=0.0, translation=(0.0, 0.0, 0.0)) -> "Pose3":
        """Z-Y-X (yaw, pitch, roll) Euler angles in radians."""
        cr, sr = np.cos(roll / 2), np.sin(roll / 2)
        cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
        cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
        q = np.array(
            [
                cr * cp * cy + sr * sp * sy,
                sr * cp * cy - cr * sp * sy,
                cr * sp * cy + sr * cp * sy,
                cr * cp * sy - sr * sp * cy,
            ]
        )
        return cls(np.asarray(translation, dtype=np.float64), q / np.linalg.norm(q))

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def inverse(self) -> "Pose3":
        w, x, y, z = self.rotation
        q_inv = np.array([w, -x, -y, -z])
        return Pose3(-(quat_to_matrix(q_inv) @ self.translation), q_inv)

    def compose(self, other: "Pose3") -> "Pose3":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        w1, x1, y1, z1 = self.rotation
        w2, x2, y2, z2 = other.rotation
        q = np.array(
            [
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            ]
        )
        return Pose3(self.matrix @ other.translation + self.translation, q / np.linalg.norm(q))

    def apply(self, points) -> np.ndarray:
        pts = as_points(np.atleast_2d(points))
        return pts @ self.matrix.T + self.translation


def transform_cloud(cloud: PointCloud, pose: Pose3) -> PointCloud:
    check_finite(cloud.points)
    return PointCloud(pose.apply(cloud.points), cloud.intensity)


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle set.

    ``source_index[i]`` is the index of vertex ``i`` in the cloud it was built
    from; ``face_normals`` are unit length. ``viewpoint`` is set on meshes
    whose normals were oriented towards it.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray
    source_index: np.ndarray
    viewpoint: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", as_points(self.vertices))
        if self.viewpoint is not None:
            object.__setattr__(self, "viewpoint", np.asarray(self.viewpoint, dtype=np.float64).reshape(3))
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(
            self, "face_normals", np.asarray(self.face_normals, dtype=np.float64).reshape(-1, 3)
        )
        object.__setattr__(
            self, "source_index", np.asarray(self.source_index, dtype=np.int64).reshape(-1)
        )

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)


@dataclass(frozen=True)
class TopologyReport:
    is_closed: bool
    euler_characteristic: int
    boundary_edge_count: int
    nonmanifold_edge_count: int
    n_vertices: int = 0
    n_edges: int = 0
    n_faces: int = 0


def validate_faces(faces: np.ndarray, n_vertices: int) -> None:
    if faces.size and (faces.min() < 0 or faces.max() >= n_vertices):
        bad = int(np.flatnonzero(((faces < 0) | (faces >= n_vertices)).any(axis=1))[0])
        raise StructuralError(f"face {bad} has an out-of-range vertex index: {faces[bad].tolist()}")
    repeats = (
        (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    )
    if repeats.any():
        bad = int(np.flatnonzero(repeats)[0])
        raise StructuralError(f"face {bad} repeats a vertex: {faces[bad].tolist()}")


def edge_face_counts(faces: np.ndarray):
    """Unique undirected edges ``(e, 2)`` and the number of faces bordering each."""
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq, counts


def mesh_topology_check(mesh: TriangleMesh) -> TopologyReport:
    faces = mesh.faces
    validate_faces(faces, mesh.n_vertices)
    if mesh.n_vertices < 4 or mesh.n_faces < 4:
        raise StructuralError(
            f"topology check needs >= 4 vertices and faces, got {mesh.n_vertices} / {mesh.n_faces}"
        )
    edges, counts = edge_face_counts(faces)
    # Vertices not referenced by any face do not take part in the surface.
    n_v = np.unique(faces).size
    boundary = int((counts == 1).sum())
    nonmanifold = int((counts > 2).sum())
    return TopologyReport(
        is_closed=boundary == 0 and nonmanifold == 0,
        euler_characteristic=int(n_v - edges.shape[0] + faces.shape[0]),
        boundary_edge_count=boundary,
        nonmanifold_edge_count=nonmanifold,
        n_vertices=int(n_v),
        n_edges=int(edges.shape[0]),
        n_faces=int(faces.shape[0]),
    )
