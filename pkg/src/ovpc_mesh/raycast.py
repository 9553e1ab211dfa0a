"""Point-in-mesh parity and point-to-mesh distance for closed triangle meshes.

Both queries go through a uniform xy grid over face bounding boxes. Parity
rays point almost straight up (a small generic tilt avoids hitting edges of
grid-aligned data), so only faces registered in the query's cell can be hit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .geometry import TriangleMesh

RAY_TILT = (3.1e-5, 1.7e-5)


@nb.njit(cache=True)
def _ray_hits(o, d, a, b, c):
    # Moller-Trumbore, counting only t > 0; returns 1 on a hit
    e1x, e1y, e1z = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    e2x, e2y, e2z = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    px = d[1] * e2z - d[2] * e2y
    py = d[2] * e2x - d[0] * e2z
    pz = d[0] * e2y - d[1] * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return 0
    inv = 1.0 / det
    tx, ty, tz = o[0] - a[0], o[1] - a[1], o[2] - a[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return 0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return 0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return 1 if t > 0.0 else 0


@nb.njit(cache=True)
def _tri_dist2(p, a, b, c):
    # closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5)
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        x, y, z = apx - v * abx, apy - v * aby, apz - v * abz
        return x * x + y * y + z * z
    cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        x, y, z = apx - w * acx, apy - w * acy, apz - w * acz
        return x * x + y * y + z * z
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        x = bpx - w * (c[0] - b[0])
        y = bpy - w * (c[1] - b[1])
        z = bpz - w * (c[2] - b[2])
        return x * x + y * y + z * z
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    x, y, z = apx - v * abx - w * acx, apy - v * aby - w * acy, apz - v * abz - w * acz
    return x * x + y * y + z * z


@nb.njit(cache=True)
def _build_grid(lo, hi, origin, cell, nx, ny):
    nf = lo.shape[0]
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    i0 = np.empty(nf, dtype=np.int64)
    i1 = np.empty(nf, dtype=np.int64)
    j0 = np.empty(nf, dtype=np.int64)
    j1 = np.empty(nf, dtype=np.int64)
    for f in range(nf):
        i0[f] = min(max(int(np.floor((lo[f, 0] - origin[0]) / cell)), 0), nx - 1)
        i1[f] = min(max(int(np.floor((hi[f, 0] - origin[0]) / cell)), 0), nx - 1)
        j0[f] = min(max(int(np.floor((lo[f, 1] - origin[1]) / cell)), 0), ny - 1)
        j1[f] = min(max(int(np.floor((hi[f, 1] - origin[1]) / cell)), 0), ny - 1)
        for i in range(i0[f], i1[f] + 1):
            for j in range(j0[f], j1[f] + 1):
                counts[i * ny + j + 1] += 1
    start = np.cumsum(counts)
    fill = start[:-1].copy()
    items = np.empty(start[-1], dtype=np.int64)
    for f in range(nf):
        for i in range(i0[f], i1[f] + 1):
            for j in range(j0[f], j1[f] + 1):
                k = i * ny + j
                items[fill[k]] = f
                fill[k] += 1
    return start, items


@nb.njit(cache=True)
def _query(verts, faces, start, items, origin, cell, nx, ny, queries, d, want_dist):
    nq = queries.shape[0]
    parity = np.zeros(nq, dtype=np.int64)
    dist2 = np.full(nq, np.inf)
    for q in range(nq):
        p = queries[q]
        i = int(np.floor((p[0] - origin[0]) / cell))
        j = int(np.floor((p[1] - origin[1]) / cell))
        if i < 0 or j < 0 or i >= nx or j >= ny:
            continue
        k = i * ny + j
        for s in range(start[k], start[k + 1]):
            f = items[s]
            a = verts[faces[f, 0]]
            b = verts[faces[f, 1]]
            c = verts[faces[f, 2]]
            parity[q] += _ray_hits(p, d, a, b, c)
            if want_dist:
                dd = _tri_dist2(p, a, b, c)
                if dd < dist2[q]:
                    dist2[q] = dd
    return parity, dist2


@dataclass
class MeshLocator:
    """Grid-accelerated inside/outside and distance queries against a mesh.

    Distances are exact for queries within ``reach`` of the mesh; beyond that
    the reported distance is only a lower bound of ``reach`` (or ``inf``).
    """

    mesh: TriangleMesh
    reach: float = 0.05
    cells: int = 256

    def __post_init__(self):
        v = np.ascontiguousarray(self.mesh.vertices)
        f = np.ascontiguousarray(self.mesh.faces)
        tri = v[f]
        zspan = float(v[:, 2].max() - v[:, 2].min()) if len(v) else 0.0
        # the tilted ray drifts in xy while climbing through the mesh
        drift = max(abs(RAY_TILT[0]), abs(RAY_TILT[1])) * (zspan + 1.0)
        pad = max(self.reach, drift) * 1.001 + 1e-12
        lo = tri.min(axis=1)[:, :2] - pad
        hi = tri.max(axis=1)[:, :2] + pad
        self._origin = lo.min(axis=0) if len(lo) else np.zeros(2)
        span = (hi.max(axis=0) - self._origin) if len(hi) else np.ones(2)
        self._cell = float(max(span.max() / self.cells, 1e-9))
        self._nx = int(span[0] / self._cell) + 1
        self._ny = int(span[1] / self._cell) + 1
        self._start, self._items = _build_grid(lo, hi, self._origin, self._cell, self._nx, self._ny)
        d = np.array([RAY_TILT[0], RAY_TILT[1], 1.0])
        self._dir = d / np.linalg.norm(d)
        self._v, self._f = v, f

    def _run(self, queries, want_dist):
        q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
        return _query(
            self._v, self._f, self._start, self._items, self._origin, self._cell,
            self._nx, self._ny, q, self._dir, want_dist,
        )

    def inside(self, queries) -> np.ndarray:
        """Odd crossing count of an upward ray from each query."""
        parity, _ = self._run(queries, False)
        return parity % 2 == 1

    def distance(self, queries) -> np.ndarray:
        _, d2 = self._run(queries, True)
        return np.sqrt(d2)

    def classify(self, queries):
        """``(inside, distance)`` in one pass."""
        parity, d2 = self._run(queries, True)
        return parity % 2 == 1, np.sqrt(d2)


def ray_crossings(mesh: TriangleMesh, origin, direction) -> int:
    """Number of faces hit by the open ray ``origin + t * direction``, ``t > 0``.

    Linear scan; intended for single rays and tests.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    tri = mesh.vertices[mesh.faces]
    return int(sum(_ray_hits(o, d, t[0], t[1], t[2]) for t in tri))


def strictly_inside(mesh: TriangleMesh, queries, tolerance: float = 0.05) -> np.ndarray:
    """Queries inside the closed mesh by parity and further than ``tolerance`` from it."""
    loc = MeshLocator(mesh, reach=tolerance)
    inside, dist = loc.classify(queries)
    return inside & (dist > tolerance)
