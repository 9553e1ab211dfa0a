"""Binary traversability of mesh faces and the classified vertex map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, StructuralError
from .geometry import TriangleMesh

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class TraversabilityConfig:
    alpha_max: float = math.radians(30.0)
    dh_max: float = 0.25

    def __post_init__(self):
        if not 0 < self.alpha_max <= math.pi / 2:
            raise DomainError(f"alpha_max must lie in (0, pi/2], got {self.alpha_max}")
        if not self.dh_max > 0:
            raise DomainError(f"dh_max must be positive, got {self.dh_max}")

    @classmethod
    def from_degrees(cls, alpha_max_deg: float = 30.0, dh_max: float = 0.25):
        return cls(math.radians(alpha_max_deg), dh_max)


class FaceLabel(NamedTuple):
    traversable: bool
    surface_angle: float


@dataclass(frozen=True)
class FaceLabels:
    """Column-wise store of :class:`FaceLabel` values, one per face."""

    traversable: np.ndarray
    surface_angle: np.ndarray

    def __len__(self):
        return self.traversable.shape[0]

    def __getitem__(self, i) -> FaceLabel:
        return FaceLabel(bool(self.traversable[i]), float(self.surface_angle[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_labels(cls, labels) -> "FaceLabels":
        if isinstance(labels, FaceLabels):
            return labels
        labels = list(labels)
        return cls(
            np.array([bool(lb.traversable) for lb in labels], dtype=bool),
            np.array([float(lb.surface_angle) for lb in labels], dtype=np.float64),
        )


def face_labels(mesh: TriangleMesh, cfg: TraversabilityConfig = TraversabilityConfig()) -> FaceLabels:
    """Label each face by surface angle against +z and its vertex height spread.

    Normals are expected to face the viewpoint side, so undersides of
    overhangs (normal z < 0) have an angle above pi/2 and are never traversable.
    """
    normals = mesh.face_normals
    norms = np.linalg.norm(normals, axis=1)
    bad = np.abs(norms - 1.0) > UNIT_TOL
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise StructuralError(f"face normal {i} is not unit length (|n| = {norms[i]!r})")
    angle = np.arccos(np.clip(normals[:, 2], -1.0, 1.0))
    z = mesh.vertices[:, 2][mesh.faces]
    dh = z.max(axis=1) - z.min(axis=1)
    traversable = (angle <= cfg.alpha_max) & (dh <= cfg.dh_max)
    return FaceLabels(traversable, angle)


def vertex_attributes(mesh: TriangleMesh, labels):
    """Per-vertex unit normals (normalized sum of incident face normals) and flags.

    A vertex is traversable only if every incident face is.
    """
    labels = FaceLabels.from_labels(labels)
    if len(labels) != mesh.n_faces:
        raise StructuralError(f"{len(labels)} labels for {mesh.n_faces} faces")
    n_v = mesh.n_vertices
    flat = mesh.faces.ravel()
    incident = np.bincount(flat, minlength=n_v)
    if (incident == 0).any():
        i = int(np.flatnonzero(incident == 0)[0])
        raise StructuralError(f"vertex {i} has no incident face")
    fn = np.repeat(mesh.face_normals, 3, axis=0)
    summed = np.stack([np.bincount(flat, weights=fn[:, k], minlength=n_v) for k in range(3)], axis=1)
    length = np.linalg.norm(summed, axis=1)
    cancelled = length <= 1e-9 * incident
    if cancelled.any():
        # opposite faces cancelled out; fall back to the first incident face
        first_face = np.full(n_v, -1, dtype=np.int64)
        first_face[flat[::-1]] = np.repeat(np.arange(mesh.n_faces), 3)[::-1]
        summed[cancelled] = mesh.face_normals[first_face[cancelled]]
        length[cancelled] = np.linalg.norm(summed[cancelled], axis=1)
    normals = summed / length[:, None]
    blocked = np.bincount(flat, weights=np.repeat(~labels.traversable, 3).astype(float), minlength=n_v)
    return normals, blocked == 0


@dataclass(frozen=True)
class NavMap:
    """Classified visible points with normals and a spatial index."""

    points: np.ndarray
    normals: np.ndarray
    traversable: np.ndarray
    viewpoint: np.ndarray
    source_index: np.ndarray = None
    tree: cKDTree = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", np.asarray(self.normals, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "traversable", np.asarray(self.traversable, dtype=bool).reshape(-1))
        object.__setattr__(self, "viewpoint", np.asarray(self.viewpoint, dtype=np.float64).reshape(3))
        if self.source_index is None:
            object.__setattr__(self, "source_index", np.arange(pts.shape[0]))
        if not (self.normals.shape[0] == self.traversable.shape[0] == pts.shape[0]):
            raise StructuralError("navmap arrays differ in length")
        if self.tree is None and pts.shape[0]:
            object.__setattr__(self, "tree", cKDTree(pts))

    def __len__(self):
        return self.points.shape[0]


def build_navmap(mesh: TriangleMesh, cfg: TraversabilityConfig = TraversabilityConfig(), viewpoint=None) -> NavMap:
    labels = face_labels(mesh, cfg)
    normals, traversable = vertex_attributes(mesh, labels)
    if viewpoint is None:
        viewpoint = mesh.viewpoint if mesh.viewpoint is not None else np.zeros(3)
    return NavMap(mesh.vertices, normals, traversable, viewpoint, mesh.source_index)
