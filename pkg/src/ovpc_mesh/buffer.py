"""Scan accumulation, alignment and voxel sub-sampling."""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, OrderingError, StateError
from .geometry import PointCloud, Pose3, transform_cloud


@dataclass(frozen=True)
class Scan:
    cloud: PointCloud
    pose: Pose3  # sensor -> odometry
    timestamp: float


@dataclass(frozen=True)
class BufferConfig:
    capacity: int = 25
    voxel_size: float = 0.2
    min_points_per_voxel: int = 2

    def __post_init__(self):
        if self.capacity < 1:
            raise DomainError("capacity must be >= 1")
        if not self.voxel_size > 0:
            raise DomainError("voxel_size must be positive")
        if self.min_points_per_voxel < 1:
            raise DomainError("min_points_per_voxel must be >= 1")


def voxel_groups(points: np.ndarray, voxel_size: float):
    """Occupied voxel keys in ascending ``(ix, iy, iz)`` order and each point's group."""
    keys = np.floor(points / voxel_size).astype(np.int64)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


def voxel_filter(cloud: PointCloud, voxel_size: float, min_points: int = 1) -> PointCloud:
    """One centroid per voxel holding at least ``min_points`` input points."""
    if not voxel_size > 0:
        raise DomainError("voxel_size must be positive")
    if len(cloud) == 0:
        return cloud
    _, inverse, counts = voxel_groups(cloud.points, voxel_size)
    n_vox = counts.size
    sums = np.stack(
        [np.bincount(inverse, weights=cloud.points[:, k], minlength=n_vox) for k in range(3)], axis=1
    )
    keep = counts >= min_points
    centroids = sums[keep] / counts[keep, None]
    intensity = None
    if cloud.intensity is not None:
        intensity = np.bincount(inverse, weights=cloud.intensity, minlength=n_vox)[keep] / counts[keep]
    return PointCloud(centroids, intensity)


class ScanBuffer:
    """Ring buffer of the most recent scans.

    One writer pushes scans; :meth:`assemble` works on a snapshot taken under
    the lock, so a concurrent push only affects later calls.
    """

    def __init__(self, config: BufferConfig = BufferConfig()):
        self.config = config
        self._scans: deque = deque(maxlen=config.capacity)
        self._last_stamp: Optional[float] = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._scans)

    def push_scan(self, scan: Scan) -> None:
        with self._lock:
            if self._last_stamp is not None and scan.timestamp < self._last_stamp:
                raise OrderingError(
                    f"scan timestamp {scan.timestamp} precedes the last pushed {self._last_stamp}"
                )
            self._scans.append(scan)
            self._last_stamp = scan.timestamp

    def snapshot(self) -> Tuple[Scan, ...]:
        with self._lock:
            return tuple(self._scans)

    def assemble(self, target: Pose3, config: Optional[BufferConfig] = None) -> PointCloud:
        """All buffered scans in the ``target`` frame, voxel filtered."""
        cfg = config or self.config
        scans = self.snapshot()
        if not scans:
            raise StateError("cannot assemble an empty scan buffer")
        to_target = target.inverse()
        parts = [transform_cloud(s.cloud, to_target.compose(s.pose)) for s in scans]
        points = np.concatenate([p.points for p in parts])
        intensity = None
        if all(p.intensity is not None for p in parts):
            intensity = np.concatenate([p.intensity for p in parts])
        return voxel_filter(PointCloud(points, intensity), cfg.voxel_size, cfg.min_points_per_voxel)


def push_scan(buffer: ScanBuffer, scan: Scan) -> None:
    buffer.push_scan(scan)


def assemble(buffer: ScanBuffer, target: Pose3, cfg: Optional[BufferConfig] = None) -> PointCloud:
    return buffer.assemble(target, cfg)
