"""Wall-clock benchmark of the cloud -> mesh -> navmap path."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np

from .errors import DomainError, OvpcError, StateError
from .evaluation import SceneSpec, gen_scene
from .geometry import PointCloud
from .ghpr import GhprConfig, build_ovpc_mesh
from .traversability import TraversabilityConfig, build_navmap

BIN_MS = 2.0
SAMPLES_HEADER = ("cloud_id", "points", "iteration", "ms")


class BenchError(OvpcError):
    """A benchmarked cloud failed; ``cloud_id`` names it."""

    def __init__(self, cloud_id: int, cause: Exception):
        self.cloud_id = cloud_id
        self.cause = cause
        super().__init__(f"cloud {cloud_id}: {type(cause).__name__}: {cause}")


@dataclass
class BenchStats:
    samples_ms: np.ndarray  # (clouds, iterations)
    point_counts: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.samples_ms.reshape(-1)

    @property
    def mean(self) -> float:
        return float(self.flat.mean())

    @property
    def std(self) -> float:
        return float(self.flat.std())

    @property
    def min(self) -> float:
        return float(self.flat.min())

    @property
    def max(self) -> float:
        return float(self.flat.max())

    def histogram(self, bin_ms: float = BIN_MS):
        """Counts over fixed-width bins starting at 0 ms; returns ``(edges, counts)``."""
        top = max(math.ceil(self.max / bin_ms), 1) * bin_ms
        if top <= self.max:
            top += bin_ms
        edges = np.arange(0.0, top + bin_ms / 2, bin_ms)
        counts, _ = np.histogram(self.flat, bins=edges)
        return edges, counts

    def per_cloud_mean(self) -> np.ndarray:
        return self.samples_ms.mean(axis=1)

    def write_samples(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SAMPLES_HEADER)
            for c, row in enumerate(self.samples_ms):
                for it, ms in enumerate(row):
                    w.writerow([c, int(self.point_counts[c]), it, f"{ms:.6f}"])

    def summary(self) -> str:
        lines = [
            f"clouds: {len(self.point_counts)}  iterations: {self.samples_ms.shape[1]}  samples: {self.flat.size}",
            f"points per cloud: min {int(self.point_counts.min())}  max {int(self.point_counts.max())}",
            f"time [ms]: mean {self.mean:.3f}  std {self.std:.3f}  min {self.min:.3f}  max {self.max:.3f}",
            f"histogram ({BIN_MS:g} ms bins):",
        ]
        edges, counts = self.histogram()
        for lo, n in zip(edges[:-1], counts):
            if n:
                lines.append(f"  [{lo:6.1f}, {lo + BIN_MS:6.1f})  {n}")
        return "\n".join(lines)


def check_clock() -> float:
    """Resolution of the monotonic performance clock in seconds."""
    info = time.get_clock_info("perf_counter")
    if not info.monotonic:
        raise StateError("perf_counter is not monotonic on this platform")
    if info.resolution > 1e-6:
        raise StateError(f"timer resolution {info.resolution:g} s is coarser than 1 us")
    return info.resolution


def run_once(cloud: PointCloud, ghpr_cfg: GhprConfig, trav_cfg: TraversabilityConfig):
    mesh = build_ovpc_mesh(cloud, ghpr_cfg)
    return build_navmap(mesh, trav_cfg)


def time_pipeline(
    clouds: Sequence[PointCloud],
    ghpr_cfg: GhprConfig,
    trav_cfg: TraversabilityConfig = TraversabilityConfig(),
    iterations: int = 10,
) -> BenchStats:
    """Time mesh + navmap construction per cloud after one untimed warm-up pass."""
    if iterations < 1:
        raise DomainError("iterations must be >= 1")
    if not clouds:
        raise DomainError("no clouds to benchmark")
    check_clock()
    samples = np.empty((len(clouds), iterations))
    for c, cloud in enumerate(clouds):
        try:
            run_once(cloud, ghpr_cfg, trav_cfg)
            for it in range(iterations):
                t0 = time.perf_counter_ns()
                run_once(cloud, ghpr_cfg, trav_cfg)
                samples[c, it] = (time.perf_counter_ns() - t0) / 1e6
        except OvpcError as exc:
            raise BenchError(c, exc) from exc
    return BenchStats(samples, np.array([len(c) for c in clouds], dtype=np.int64))


def bench_clouds(n_points: int, count: int = 3, seed: int = 0, template: SceneSpec = SceneSpec()) -> List[PointCloud]:
    """Random ``n_points`` subsets of default synthetic bundles (varying slope)."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        spec = replace(template, slope_deg=float(rng.uniform(0, 35)), seed=int(rng.integers(2**31)))
        pts = gen_scene(spec).bundled_cloud.points
        if n_points > len(pts):
            raise DomainError(f"scene has only {len(pts)} points, {n_points} requested")
        out.append(PointCloud(pts[np.sort(rng.choice(len(pts), n_points, replace=False))]))
    return out
