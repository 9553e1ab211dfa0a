"""Synthetic ground/incline scenes and the normal-accuracy study.

Compares OVPC vertex normals against a covariance (PCA) baseline on noisy,
misaligned bundles of simulated scans.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .errors import DataError, DomainError, GeometryError
from .geometry import PointCloud, Pose3
from .ghpr import GhprConfig, build_ovpc_mesh
from .traversability import TraversabilityConfig, build_navmap

GROUND, INCLINE, ROOF = 0, 1, 2
SWEEP_HEADER = ("slope_deg", "method", "mean_error_deg", "std_error_deg", "n_points")


@dataclass(frozen=True)
class SceneSpec:
    extent: float = 20.0
    spacing: float = 0.2
    slope_deg: float = 0.0
    scans: int = 5
    point_noise: float = 0.05
    rot_noise_deg: float = 0.5
    trans_noise: float = 0.1
    viewpoint_height: float = 1.88
    incline_start_x: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not (self.extent > 0 and self.spacing > 0):
            raise DomainError("extent and spacing must be positive")
        if not 0 <= self.slope_deg <= 89:
            raise DomainError(f"slope_deg must be within [0, 89], got {self.slope_deg}")
        if self.scans < 1:
            raise DomainError("scans must be >= 1")
        if min(self.point_noise, self.rot_noise_deg, self.trans_noise) < 0:
            raise DomainError("noise magnitudes must be non-negative")

    @property
    def viewpoint(self) -> np.ndarray:
        # robot stands at the scene centre
        return np.array([0.0, 0.0, self.viewpoint_height])

    def noiseless(self, scans: int = 1) -> "SceneSpec":
        return replace(self, point_noise=0.0, rot_noise_deg=0.0, trans_noise=0.0, scans=scans)


@dataclass(frozen=True)
class SyntheticScene:
    bundled_cloud: PointCloud
    gt_normals: np.ndarray
    gt_plane_id: np.ndarray
    scan_id: np.ndarray
    viewpoint: np.ndarray


def _axis_count(length: float, spacing: float) -> int:
    return int(math.floor(length / spacing + 1e-9)) + 1


def grid_counts(spec: SceneSpec):
    """Closed-form (ground, incline) point counts of one clean scan."""
    half = spec.extent / 2
    ny = _axis_count(spec.extent, spec.spacing)
    ground_len = min(spec.incline_start_x, half) + half
    nx_ground = _axis_count(ground_len, spec.spacing)
    run = half - spec.incline_start_x
    if run <= 0:
        return nx_ground * ny, 0
    surface_len = run / math.cos(math.radians(spec.slope_deg))
    nx_incline = _axis_count(surface_len, spec.spacing) - 1  # hinge row belongs to the ground
    return nx_ground * ny, nx_incline * ny


def _clean_scan(spec: SceneSpec):
    half = spec.extent / 2
    n_ground, n_incline = grid_counts(spec)
    ny = _axis_count(spec.extent, spec.spacing)
    ys = -half + spec.spacing * np.arange(ny)
    xs = -half + spec.spacing * np.arange(n_ground // ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    ground = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    normals = [np.tile([0.0, 0.0, 1.0], (ground.shape[0], 1))]
    ids = [np.full(ground.shape[0], GROUND)]
    pts = [ground]
    if n_incline:
        alpha = math.radians(spec.slope_deg)
        s = spec.spacing * np.arange(1, n_incline // ny + 1)
        sx, sy = np.meshgrid(s, ys, indexing="ij")
        sx = sx.ravel()
        incline = np.column_stack(
            [spec.incline_start_x + sx * math.cos(alpha), sy.ravel(), sx * math.sin(alpha)]
        )
        pts.append(incline)
        normals.append(np.tile([-math.sin(alpha), 0.0, math.cos(alpha)], (incline.shape[0], 1)))
        ids.append(np.full(incline.shape[0], INCLINE))
    return np.concatenate(pts), np.concatenate(normals), np.concatenate(ids)


def _bundle(spec: SceneSpec, clean, normals, ids) -> SyntheticScene:
    rng = np.random.default_rng(spec.seed)
    rot = math.radians(spec.rot_noise_deg)
    clouds, scan_ids = [], []
    for k in range(spec.scans):
        roll, pitch, yaw = rng.uniform(-rot, rot, 3) if rot > 0 else (0.0, 0.0, 0.0)
        t = rng.uniform(-spec.trans_noise, spec.trans_noise, 3) if spec.trans_noise > 0 else np.zeros(3)
        pose = Pose3.from_euler(roll, pitch, yaw, translation=t)
        pts = pose.apply(clean)
        if spec.point_noise > 0:
            pts = pts + rng.uniform(-spec.point_noise, spec.point_noise, pts.shape)
        clouds.append(pts)
        scan_ids.append(np.full(pts.shape[0], k))
    n = spec.scans
    return SyntheticScene(
        bundled_cloud=PointCloud(np.concatenate(clouds)),
        gt_normals=np.tile(normals, (n, 1)),
        gt_plane_id=np.tile(ids, n),
        scan_id=np.concatenate(scan_ids),
        viewpoint=spec.viewpoint,
    )


def gen_scene(spec: SceneSpec) -> SyntheticScene:
    """Ground plane plus an incline hinged at ``incline_start_x``, bundled over scans.

    Each scan receives a rigid perturbation (Euler angles uniform in
    ``±rot_noise_deg``, translation uniform in ``±trans_noise`` per axis) and
    independent per-point uniform noise. Ground-truth normals come from the
    generating planes before any noise.
    """
    return _bundle(spec, *_clean_scan(spec))


def gen_overhang_scene(spec: SceneSpec, roof_height: float = 2.5, roof_x_min: float = 0.0) -> SyntheticScene:
    """Flat ground over the whole extent and a roof plane covering ``x >= roof_x_min``."""
    half = spec.extent / 2
    ny = _axis_count(spec.extent, spec.spacing)
    ys = -half + spec.spacing * np.arange(ny)
    xs = -half + spec.spacing * np.arange(_axis_count(spec.extent, spec.spacing))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    ground = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    rx = xs[xs >= roof_x_min - 1e-9]
    rgx, rgy = np.meshgrid(rx, ys, indexing="ij")
    roof = np.column_stack([rgx.ravel(), rgy.ravel(), np.full(rgx.size, roof_height)])
    clean = np.concatenate([ground, roof])
    normals = np.concatenate([np.tile([0.0, 0.0, 1.0], (len(ground), 1)), np.tile([0.0, 0.0, -1.0], (len(roof), 1))])
    ids = np.concatenate([np.full(len(ground), GROUND), np.full(len(roof), ROOF)])
    return _bundle(spec, clean, normals, ids)


def footprint_distance(xy: np.ndarray, footprint_xy: np.ndarray) -> np.ndarray:
    """Distance from each xy point to the boundary of the convex footprint.

    Points outside the footprint get a distance of 0.
    """
    hull = ConvexHull(footprint_xy)
    poly = footprint_xy[hull.vertices]  # counter-clockwise
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ap = xy[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nkj,kj->nk", ap, ab) / np.einsum("kj,kj->k", ab, ab), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    dist = np.linalg.norm(xy[:, None, :] - closest, axis=2).min(axis=1)
    cross = ab[None, :, 0] * ap[..., 1] - ab[None, :, 1] * ap[..., 0]
    inside = (cross >= 0).all(axis=1)
    return np.where(inside, dist, 0.0)


def interior_mask(points: np.ndarray, cloud_points: np.ndarray, margin: float = 1.0) -> np.ndarray:
    """True for points further than ``margin`` from the cloud's xy footprint edge."""
    return footprint_distance(points[:, :2], cloud_points[:, :2]) > margin


# ---------------------------------------------------------------------------
# normals
# ---------------------------------------------------------------------------


class InsufficientNeighborsError(GeometryError):
    pass


class DegenerateNeighborhoodError(GeometryError):
    pass


def pca_normals(points: np.ndarray, indices, radius: float, viewpoint=None, tree: Optional[cKDTree] = None):
    """Batched covariance normals; returns ``(normals, status)``.

    ``status`` is 0 on success, 1 for fewer than 3 neighbours (self included)
    and 2 when the two smallest eigenvalues tie within ``1e-12`` relative to the
    largest. Failed rows hold NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    tree = tree if tree is not None else cKDTree(points)
    m = indices.size
    normals = np.full((m, 3), np.nan)
    status = np.zeros(m, dtype=np.int8)
    if m == 0:
        return normals, status
    neigh = tree.query_ball_point(points[indices], radius)
    counts = np.fromiter((len(nb) for nb in neigh), dtype=np.int64, count=m)
    flat = np.fromiter((i for nb in neigh for i in nb), dtype=np.int64, count=int(counts.sum()))
    owner = np.repeat(np.arange(m), counts)
    d = points[flat] - points[indices][owner]
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    ok = counts >= 3
    status[~ok] = 1
    safe_starts = np.minimum(starts, max(flat.size - 1, 0))
    k = np.maximum(counts, 1)[:, None]
    mean = np.add.reduceat(d, safe_starts, axis=0) / k
    outer = np.add.reduceat(d[:, :, None] * d[:, None, :], safe_starts, axis=0) / k[:, :, None]
    cov = outer - mean[:, :, None] * mean[:, None, :]
    w, v = np.linalg.eigh(cov[ok])
    n = v[:, :, 0]
    tie = (w[:, 1] - w[:, 0]) <= 1e-12 * np.maximum(w[:, 2], np.finfo(float).tiny)
    ok_idx = np.flatnonzero(ok)
    status[ok_idx[tie]] = 2
    if viewpoint is not None:
        to_vp = np.asarray(viewpoint, dtype=np.float64) - points[indices[ok]]
        n = np.where((np.einsum("ij,ij->i", n, to_vp) < 0)[:, None], -n, n)
    good = ~tie
    normals[ok_idx[good]] = n[good]
    return normals, status


def pca_normal(cloud: PointCloud, index: int, radius: float, viewpoint=None, tree=None) -> np.ndarray:
    """Smallest-eigenvalue eigenvector of the neighbourhood covariance, facing the viewpoint."""
    normals, status = pca_normals(cloud.points, [index], radius, viewpoint, tree)
    if status[0] == 1:
        raise InsufficientNeighborsError(f"point {index} has fewer than 3 neighbours within {radius} m")
    if status[0] == 2:
        raise DegenerateNeighborhoodError(f"point {index}: smallest covariance eigenvalue is not unique")
    return normals[0]


def angular_error_deg(a, b):
    """Unsigned angle between two unit vectors (or rows of vectors), in [0, 90] degrees."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for v in (a, b):
        if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > 1e-6):
            raise DomainError("angular_error_deg expects unit vectors")
    dot = np.abs(np.sum(a * b, axis=-1))
    out = np.degrees(np.arccos(np.clip(dot, 0.0, 1.0)))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    slope_deg: float
    method: str
    mean_error_deg: float
    std_error_deg: float
    n_points: int
    # rim-inclusive statistics, reported alongside the headline numbers
    mean_error_all_deg: float = float("nan")
    std_error_all_deg: float = float("nan")
    n_points_all: int = 0


def _pool(rows: Sequence[SweepRow], rim: bool):
    n = np.array([r.n_points_all if rim else r.n_points for r in rows], dtype=np.float64)
    m = np.array([r.mean_error_all_deg if rim else r.mean_error_deg for r in rows])
    s = np.array([r.std_error_all_deg if rim else r.std_error_deg for r in rows])
    total = n.sum()
    if total == 0:
        return float("nan"), float("nan"), 0
    mean = float((n * m).sum() / total)
    second = float((n * (s**2 + m**2)).sum() / total)
    return mean, math.sqrt(max(second - mean * mean, 0.0)), int(total)


@dataclass
class SweepTable:
    rows: List[SweepRow] = field(default_factory=list)

    def method_rows(self, method: str) -> List[SweepRow]:
        return [r for r in self.rows if r.method == method]

    def overall(self, method: str, include_rim: bool = False):
        """Pooled ``(mean, std, n)`` over every slope for one method."""
        return _pool(self.method_rows(method), include_rim)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for r in self.rows:
                w.writerow([f"{r.slope_deg:.6g}", r.method, f"{r.mean_error_deg:.9g}", f"{r.std_error_deg:.9g}", r.n_points])

    @classmethod
    def from_csv(cls, path) -> "SweepTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != SWEEP_HEADER:
                raise DataError(f"unexpected sweep header {header!r}")
            rows = [SweepRow(float(a), b, float(c), float(d), int(e)) for a, b, c, d, e in reader]
        return cls(rows)

    def summary(self) -> str:
        lines = []
        for method in ("ovpc", "pca"):
            m, s, n = self.overall(method)
            ma, sa, na = self.overall(method, include_rim=True)
            lines.append(
                f"{method}: interior mean {m:.3f} deg, std {s:.3f} deg (n={n}); "
                f"incl. rim mean {ma:.3f} deg, std {sa:.3f} deg (n={na})"
            )
        return "\n".join(lines)


@dataclass
class TrialErrors:
    ovpc: np.ndarray
    pca: np.ndarray
    interior: np.ndarray


def evaluate_scene(
    scene: SyntheticScene,
    gamma: float = -0.03,
    trav_cfg: TraversabilityConfig = TraversabilityConfig(),
    pca_radius: float = 0.3,
    margin: float = 1.0,
) -> TrialErrors:
    """Angular errors of OVPC and PCA normals at every NavMap vertex of one scene."""
    cloud = scene.bundled_cloud
    mesh = build_ovpc_mesh(cloud, GhprConfig(viewpoint=scene.viewpoint, gamma=gamma))
    nav = build_navmap(mesh, trav_cfg)
    src = nav.source_index
    gt = scene.gt_normals[src]
    ovpc_err = angular_error_deg(nav.normals, gt)
    normals, status = pca_normals(cloud.points, src, pca_radius, scene.viewpoint)
    pca_err = np.full(src.size, np.nan)
    ok = status == 0
    pca_err[ok] = angular_error_deg(normals[ok], gt[ok])
    interior = interior_mask(nav.points, cloud.points, margin)
    return TrialErrors(ovpc_err, pca_err, interior)


def trial_seed(seed: int, slope_index: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, slope_index, trial]).generate_state(1)[0])


def slope_values(slope_min: float, slope_max: float, step: float) -> np.ndarray:
    if not step > 0:
        raise DomainError("step must be positive")
    if slope_max < slope_min:
        raise DomainError("slope_max must be >= slope_min")
    count = int(math.floor((slope_max - slope_min) / step + 1e-9)) + 1
    return np.round(slope_min + step * np.arange(count), 9)


def _stats(values: np.ndarray):
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan"), float("nan"), 0
    return float(values.mean()), float(values.std()), int(values.size)


def run_normal_sweep(
    template: SceneSpec = SceneSpec(),
    slope_min: float = 0.0,
    slope_max: float = 35.0,
    step: float = 1.0,
    trials: int = 1,
    gamma: float = -0.03,
    trav_cfg: TraversabilityConfig = TraversabilityConfig(),
    pca_radius: float = 0.3,
    margin: float = 1.0,
) -> SweepTable:
    """Per-slope angular-error statistics for the OVPC and PCA normals.

    Rim vertices (within ``margin`` of the footprint edge) are excluded from the
    headline columns and kept in the ``*_all`` fields.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    table = SweepTable()
    for si, slope in enumerate(slope_values(slope_min, slope_max, step)):
        errs = {"ovpc": ([], []), "pca": ([], [])}
        for t in range(trials):
            spec = replace(template, slope_deg=float(slope), seed=trial_seed(template.seed, si, t))
            res = evaluate_scene(gen_scene(spec), gamma, trav_cfg, pca_radius, margin)
            ok = np.isfinite(res.pca)
            for name, e in (("ovpc", res.ovpc), ("pca", res.pca)):
                # both methods are scored on the same source points
                errs[name][0].append(e[res.interior & ok])
                errs[name][1].append(e[ok])
        for name in ("ovpc", "pca"):
            m, s, n = _stats(np.concatenate(errs[name][0]))
            ma, sa, na = _stats(np.concatenate(errs[name][1]))
            table.rows.append(SweepRow(float(slope), name, m, s, n, ma, sa, na))
    return table
