"""Hidden point removal with the exponential kernel and the lifted OVPC mesh.

Each point ``p`` is mapped radially about the viewpoint ``C`` to
``C + |p - C|**gamma * (p - C) / |p - C|``. Because ``gamma < 0`` the map
inverts distances, so a point is visible exactly when its image is on the
convex hull of all images. The hull's connectivity, transported back onto the
original coordinates of the visible points, is a closed triangle mesh that
bounds the free space around the viewpoint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SizeError
from .geometry import PointCloud, TriangleMesh, check_finite
from .hull import HullConfig, HullMesh, canonical_faces, quickhull3

log = logging.getLogger(__name__)

DEFAULT_GAMMA = -0.03


@dataclass(frozen=True)
class GhprConfig:
    viewpoint: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gamma: float = DEFAULT_GAMMA
    min_range: float = 1e-6
    hull: HullConfig = HullConfig()

    def __post_init__(self):
        vp = np.asarray(self.viewpoint, dtype=np.float64).reshape(3)
        if not np.isfinite(vp).all():
            raise DomainError("viewpoint must be finite")
        object.__setattr__(self, "viewpoint", vp)
        if not self.gamma < 0:
            raise DomainError(f"gamma must be negative, got {self.gamma}")
        if not self.min_range > 0:
            raise DomainError(f"min_range must be positive, got {self.min_range}")


@dataclass(frozen=True)
class VisibleResult:
    visible_indices: np.ndarray
    image_cloud: PointCloud
    hull: HullMesh
    kept_indices: np.ndarray  # input index of each image point
    n_dropped: int = 0

    @property
    def visible_mask(self) -> np.ndarray:
        return self.hull.vertex_on_hull


def kernel_value(d, gamma: float):
    """Exponential kernel ``d ** gamma``; strictly decreasing for ``gamma < 0``."""
    d_arr = np.asarray(d, dtype=np.float64)
    if not np.all(d_arr > 0):
        raise DomainError("kernel is only defined for d > 0")
    out = np.power(d_arr, gamma)
    return float(out) if out.ndim == 0 else out


def image_points(points: np.ndarray, viewpoint: np.ndarray, gamma: float) -> np.ndarray:
    """Images relative to the viewpoint (the viewpoint maps to the origin)."""
    rel = points - viewpoint
    d = np.linalg.norm(rel, axis=1)
    return rel * (kernel_value(d, gamma) / d)[:, None]


def ghpr_visible(cloud: PointCloud, config: GhprConfig) -> VisibleResult:
    pts = cloud.points
    check_finite(pts)
    d = np.linalg.norm(pts - config.viewpoint, axis=1)
    keep = d >= config.min_range
    kept = np.flatnonzero(keep)
    n_dropped = int(pts.shape[0] - kept.size)
    if n_dropped:
        log.info("dropped %d points closer than %g m to the viewpoint", n_dropped, config.min_range)
    if kept.size < 4:
        raise SizeError(f"hidden point removal needs >= 4 usable points, got {kept.size}")

    # hull on viewpoint-centred images: same combinatorics, better conditioning
    rel_images = np.ascontiguousarray(image_points(pts[kept], config.viewpoint, config.gamma))
    local = quickhull3(rel_images, config.hull)

    on_hull = np.zeros(pts.shape[0], dtype=bool)
    on_hull[kept] = local.vertex_on_hull
    hull = HullMesh(
        vertices=local.vertices + config.viewpoint,
        faces=local.faces,
        face_normals=local.face_normals,
        source_index=kept[local.source_index],
        vertex_on_hull=on_hull,
        epsilon=local.epsilon,
    )
    return VisibleResult(
        visible_indices=np.flatnonzero(on_hull),
        image_cloud=PointCloud(rel_images + config.viewpoint),
        hull=hull,
        kept_indices=kept,
        n_dropped=n_dropped,
    )


def orient_faces(vertices: np.ndarray, faces: np.ndarray, viewpoint: np.ndarray):
    """Unit face normals pointing to the viewpoint side; winding flipped to match.

    Faces with zero area in original space get the unit direction from their
    centroid to the viewpoint as a stand-in normal.
    """
    a, b, c = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    n = np.cross(b - a, c - a)
    to_vp = viewpoint - (a + b + c) / 3.0
    flip = np.einsum("ij,ij->i", n, to_vp) < 0
    n[flip] *= -1.0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    ln = np.linalg.norm(n, axis=1)
    degenerate = ln <= 1e-12 * np.maximum(1.0, np.einsum("ij,ij->i", b - a, b - a))
    if degenerate.any():
        n[degenerate] = to_vp[degenerate]
        ln[degenerate] = np.linalg.norm(n[degenerate], axis=1)
    return faces, n / ln[:, None]


def lift_hull(cloud: PointCloud, result: VisibleResult, viewpoint: np.ndarray) -> TriangleMesh:
    faces_src = result.hull.source_index[result.hull.faces]
    used = np.unique(faces_src)
    remap = np.full(len(cloud), -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    vertices = cloud.points[used]
    faces, normals = orient_faces(vertices, remap[faces_src], viewpoint)
    faces, order = canonical_faces(faces, return_order=True)
    normals = normals[order]
    return TriangleMesh(
        vertices=vertices, faces=faces, face_normals=normals, source_index=used, viewpoint=viewpoint
    )


def build_ovpc_mesh(cloud: PointCloud, config: GhprConfig) -> TriangleMesh:
    """Watertight mesh over the visible points, normals facing the viewpoint."""
    return lift_hull(cloud, ghpr_visible(cloud, config), config.viewpoint)
