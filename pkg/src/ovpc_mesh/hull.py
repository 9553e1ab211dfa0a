"""3D quickhull with a magnitude-scaled tolerance.

The incremental core runs under numba; the Python wrapper takes care of the
initial simplex, degeneracy diagnostics and the canonical output ordering.

Tolerance handling: a point is *outside* a face when its signed distance
exceeds ``eps``. Points that end up within ``eps`` of the final hull without
being triangulation vertices are kept in per-face coplanar sets and still
reported through ``vertex_on_hull``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import DegeneracyError, SizeError, StructuralError
from .geometry import TriangleMesh, as_points, edge_face_counts

_DIM_NAMES = {0: "coincident (0-dimensional)", 1: "collinear (1-dimensional)", 2: "coplanar (2-dimensional)"}


@dataclass(frozen=True)
class HullConfig:
    epsilon_scale: float = 1e-10

    def __post_init__(self):
        if not self.epsilon_scale > 0:
            raise ValueError("epsilon_scale must be > 0")

    def tolerance(self, points: np.ndarray) -> float:
        scale = float(np.abs(points).max()) if points.size else 0.0
        return self.epsilon_scale * max(scale, np.finfo(float).tiny)


@dataclass(frozen=True)
class HullMesh(TriangleMesh):
    """Hull triangulation; ``vertex_on_hull`` has one flag per *input* point."""

    vertex_on_hull: np.ndarray = None
    epsilon: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "vertex_on_hull", np.asarray(self.vertex_on_hull, dtype=bool))


# ---------------------------------------------------------------------------
# numba core
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _plane(pts, a, b, c):
    ax, ay, az = pts[a, 0], pts[a, 1], pts[a, 2]
    ux, uy, uz = pts[b, 0] - ax, pts[b, 1] - ay, pts[b, 2] - az
    vx, vy, vz = pts[c, 0] - ax, pts[c, 1] - ay, pts[c, 2] - az
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    ln = np.sqrt(nx * nx + ny * ny + nz * nz)
    if ln > 0.0:
        nx /= ln
        ny /= ln
        nz /= ln
    cx = (pts[a, 0] + pts[b, 0] + pts[c, 0]) / 3.0
    cy = (pts[a, 1] + pts[b, 1] + pts[c, 1]) / 3.0
    cz = (pts[a, 2] + pts[b, 2] + pts[c, 2]) / 3.0
    return nx, ny, nz, nx * cx + ny * cy + nz * cz


@nb.njit(cache=True)
def _grow2(arr, need):
    if need <= arr.shape[0]:
        return arr
    cap = arr.shape[0]
    while cap < need:
        cap *= 2
    out = np.empty((cap, arr.shape[1]), arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@nb.njit(cache=True)
def _grow1(arr, need, fill):
    if need <= arr.shape[0]:
        return arr
    cap = arr.shape[0]
    while cap < need:
        cap *= 2
    out = np.full(cap, fill, arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@nb.njit(cache=True)
def _quickhull_core(pts, simplex, eps):
    """Returns ``(faces, on_hull, skipped)`` for a full-dimensional point set.

    ``simplex`` holds four point indices already oriented so that the fourth
    lies on the negative side of the plane through the first three.
    """
    n = pts.shape[0]
    cap = 64
    fv = np.empty((cap, 3), np.int64)  # vertex triple, CCW seen from outside
    fn = np.empty((cap, 3), np.int64)  # fn[f, k]: face across edge (fv[f,k], fv[f,k+1])
    pl = np.empty((cap, 4), np.float64)  # unit normal + offset
    alive = np.zeros(cap, np.bool_)
    ohead = np.full(cap, -1, np.int64)  # outside-set list head
    chead = np.full(cap, -1, np.int64)  # coplanar-set list head
    far_pt = np.full(cap, -1, np.int64)
    far_d = np.zeros(cap, np.float64)
    mark = np.zeros(cap, np.int64)
    pnext = np.full(n, -1, np.int64)
    is_vertex = np.zeros(n, np.bool_)
    nf = 0

    s0, s1, s2, s3 = simplex[0], simplex[1], simplex[2], simplex[3]
    init = np.array([[s0, s1, s2], [s0, s3, s1], [s1, s3, s2], [s2, s3, s0]], np.int64)
    # neighbours derived from the shared edges of the tetrahedron
    for f in range(4):
        a, b, c = init[f, 0], init[f, 1], init[f, 2]
        fv[f, 0], fv[f, 1], fv[f, 2] = a, b, c
        nx, ny, nz, off = _plane(pts, a, b, c)
        pl[f, 0], pl[f, 1], pl[f, 2], pl[f, 3] = nx, ny, nz, off
        alive[f] = True
    for f in range(4):
        for k in range(3):
            a = fv[f, k]
            b = fv[f, (k + 1) % 3]
            for g in range(4):
                if g == f:
                    continue
                for j in range(3):
                    if fv[g, j] == b and fv[g, (j + 1) % 3] == a:
                        fn[f, k] = g
    nf = 4
    for k in range(4):
        is_vertex[simplex[k]] = True

    # initial outside sets
    for p in range(n):
        if is_vertex[p]:
            continue
        px, py, pz = pts[p, 0], pts[p, 1], pts[p, 2]
        best = -1
        best_d = -np.inf
        placed = False
        for f in range(4):
            d = pl[f, 0] * px + pl[f, 1] * py + pl[f, 2] * pz - pl[f, 3]
            if d > eps:
                pnext[p] = ohead[f]
                ohead[f] = p
                if d > far_d[f] or far_pt[f] < 0:
                    far_d[f] = d
                    far_pt[f] = p
                placed = True
                break
            if d > best_d:
                best_d = d
                best = f
        if not placed and best_d >= -eps:
            pnext[p] = chead[best]
            chead[best] = p

    work = np.empty(16, np.int64)
    nwork = 0
    for f in range(4):
        if ohead[f] >= 0:
            work = _grow1(work, nwork + 1, -1)
            work[nwork] = f
            nwork += 1

    # scratch buffers
    stack_f = np.empty(16, np.int64)
    stack_s = np.empty(16, np.int64)
    stack_i = np.empty(16, np.int64)
    visible = np.empty(16, np.int64)
    hz_f = np.empty(16, np.int64)
    hz_e = np.empty(16, np.int64)
    pending = np.empty(64, np.int64)
    epoch = 0
    skipped = 0

    whead = 0
    while whead < nwork:
        f0 = work[whead]
        whead += 1
        if not alive[f0] or ohead[f0] < 0:
            continue
        eye = far_pt[f0]
        ex, ey, ez = pts[eye, 0], pts[eye, 1], pts[eye, 2]

        # depth-first horizon search producing an ordered edge loop
        epoch += 1
        mark[f0] = epoch
        nvis = 0
        visible[nvis] = f0
        nvis += 1
        nh = 0
        top = 0
        stack_f[0], stack_s[0], stack_i[0] = f0, 0, 0
        top = 1
        while top > 0:
            t = top - 1
            f = stack_f[t]
            if stack_i[t] == 3:
                top -= 1
                continue
            e = (stack_s[t] + stack_i[t]) % 3
            stack_i[t] += 1
            g = fn[f, e]
            if mark[g] == epoch:
                continue
            d = pl[g, 0] * ex + pl[g, 1] * ey + pl[g, 2] * ez - pl[g, 3]
            if d > eps:
                mark[g] = epoch
                visible = _grow1(visible, nvis + 1, -1)
                visible[nvis] = g
                nvis += 1
                back = 0
                for j in range(3):
                    if fn[g, j] == f:
                        back = j
                stack_f = _grow1(stack_f, top + 1, -1)
                stack_s = _grow1(stack_s, top + 1, -1)
                stack_i = _grow1(stack_i, top + 1, -1)
                stack_f[top], stack_s[top], stack_i[top] = g, back + 1, 0
                top += 1
            else:
                hz_f = _grow1(hz_f, nh + 1, -1)
                hz_e = _grow1(hz_e, nh + 1, -1)
                hz_f[nh] = f
                hz_e[nh] = e
                nh += 1

        # the horizon must be one simple closed loop
        ok = nh >= 3
        if ok:
            for h in range(nh):
                f, e = hz_f[h], hz_e[h]
                b = fv[f, (e + 1) % 3]
                f2, e2 = hz_f[(h + 1) % nh], hz_e[(h + 1) % nh]
                if fv[f2, e2] != b:
                    ok = False
                    break
        if ok:
            for h in range(nh):
                a = fv[hz_f[h], hz_e[h]]
                for h2 in range(h + 1, nh):
                    if fv[hz_f[h2], hz_e[h2]] == a:
                        ok = False
                        break
                if not ok:
                    break
        if not ok:
            # numerically inconsistent visibility: demote the eye to coplanar
            skipped += 1
            prev = -1
            p = ohead[f0]
            while p >= 0:
                if p == eye:
                    if prev < 0:
                        ohead[f0] = pnext[p]
                    else:
                        pnext[prev] = pnext[p]
                    break
                prev = p
                p = pnext[p]
            pnext[eye] = chead[f0]
            chead[f0] = eye
            far_pt[f0] = -1
            far_d[f0] = 0.0
            p = ohead[f0]
            while p >= 0:
                d = pl[f0, 0] * pts[p, 0] + pl[f0, 1] * pts[p, 1] + pl[f0, 2] * pts[p, 2] - pl[f0, 3]
                if far_pt[f0] < 0 or d > far_d[f0]:
                    far_d[f0] = d
                    far_pt[f0] = p
                p = pnext[p]
            if ohead[f0] >= 0:
                work = _grow1(work, nwork + 1, -1)
                work[nwork] = f0
                nwork += 1
            continue

        # gather points of the faces about to be deleted
        npend = 0
        for v in range(nvis):
            f = visible[v]
            alive[f] = False
            p = ohead[f]
            while p >= 0:
                nxt = pnext[p]
                if p != eye:
                    pending = _grow1(pending, npend + 1, -1)
                    pending[npend] = p
                    npend += 1
                p = nxt
            p = chead[f]
            while p >= 0:
                nxt = pnext[p]
                pending = _grow1(pending, npend + 1, -1)
                pending[npend] = p
                npend += 1
                p = nxt
            ohead[f] = -1
            chead[f] = -1

        # cone of new faces over the horizon
        first_new = nf
        need = nf + nh
        if need > fv.shape[0]:
            newcap = fv.shape[0]
            while newcap < need:
                newcap *= 2
            fv = _grow2(fv, newcap)
            fn = _grow2(fn, newcap)
            pl = _grow2(pl, newcap)
            alive = _grow1(alive, newcap, False)
            ohead = _grow1(ohead, newcap, -1)
            chead = _grow1(chead, newcap, -1)
            far_pt = _grow1(far_pt, newcap, -1)
            far_d = _grow1(far_d, newcap, 0.0)
            mark = _grow1(mark, newcap, 0)
        for h in range(nh):
            f, e = hz_f[h], hz_e[h]
            a = fv[f, e]
            b = fv[f, (e + 1) % 3]
            g = fn[f, e]
            nfi = first_new + h
            fv[nfi, 0], fv[nfi, 1], fv[nfi, 2] = a, b, eye
            nx, ny, nz, off = _plane(pts, a, b, eye)
            pl[nfi, 0], pl[nfi, 1], pl[nfi, 2], pl[nfi, 3] = nx, ny, nz, off
            alive[nfi] = True
            ohead[nfi] = -1
            chead[nfi] = -1
            far_pt[nfi] = -1
            far_d[nfi] = 0.0
            mark[nfi] = 0
            fn[nfi, 0] = g
            fn[nfi, 1] = first_new + (h + 1) % nh
            fn[nfi, 2] = first_new + (h - 1 + nh) % nh
            for j in range(3):
                if fv[g, j] == b and fv[g, (j + 1) % 3] == a:
                    fn[g, j] = nfi
        nf += nh
        is_vertex[eye] = True

        # reassign orphaned points
        for q in range(npend):
            p = pending[q]
            px, py, pz = pts[p, 0], pts[p, 1], pts[p, 2]
            best = -1
            best_d = -np.inf
            placed = False
            for h in range(nh):
                f = first_new + h
                d = pl[f, 0] * px + pl[f, 1] * py + pl[f, 2] * pz - pl[f, 3]
                if d > eps:
                    pnext[p] = ohead[f]
                    ohead[f] = p
                    if far_pt[f] < 0 or d > far_d[f]:
                        far_d[f] = d
                        far_pt[f] = p
                    placed = True
                    break
                if d > best_d:
                    best_d = d
                    best = f
            if not placed and best_d >= -eps:
                pnext[p] = chead[best]
                chead[best] = p
        for h in range(nh):
            f = first_new + h
            if ohead[f] >= 0:
                work = _grow1(work, nwork + 1, -1)
                work[nwork] = f
                nwork += 1

    count = 0
    for f in range(nf):
        if alive[f]:
            count += 1
    faces = np.empty((count, 3), np.int64)
    on_hull = np.zeros(n, np.bool_)
    k = 0
    for f in range(nf):
        if alive[f]:
            faces[k, 0], faces[k, 1], faces[k, 2] = fv[f, 0], fv[f, 1], fv[f, 2]
            k += 1
            for j in range(3):
                on_hull[fv[f, j]] = True
            p = chead[f]
            while p >= 0:
                on_hull[p] = True
                p = pnext[p]
    return faces, on_hull, skipped


# ---------------------------------------------------------------------------
# Python surface
# ---------------------------------------------------------------------------


def _initial_simplex(pts: np.ndarray, eps: float) -> np.ndarray:
    extremes = []
    for axis in range(3):
        extremes.append(int(np.argmin(pts[:, axis])))
        extremes.append(int(np.argmax(pts[:, axis])))
    best, i0, i1 = -1.0, extremes[0], extremes[1]
    for a in range(6):
        for b in range(a + 1, 6):
            d = float(np.linalg.norm(pts[extremes[a]] - pts[extremes[b]]))
            if d > best:
                best, i0, i1 = d, extremes[a], extremes[b]
    if best <= eps:
        raise DegeneracyError(f"input is degenerate: {_DIM_NAMES[0]}", dimension=0)

    direction = (pts[i1] - pts[i0]) / best
    rel = pts - pts[i0]
    line_dist = np.linalg.norm(np.cross(rel, direction), axis=1)
    i2 = int(np.argmax(line_dist))
    if line_dist[i2] <= eps:
        raise DegeneracyError(f"input is degenerate: {_DIM_NAMES[1]}", dimension=1)

    normal = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    normal /= np.linalg.norm(normal)
    plane_dist = rel @ normal
    i3 = int(np.argmax(np.abs(plane_dist)))
    if abs(plane_dist[i3]) <= eps:
        raise DegeneracyError(f"input is degenerate: {_DIM_NAMES[2]}", dimension=2)
    if plane_dist[i3] > 0:
        i1, i2 = i2, i1
    return np.array([i0, i1, i2, i3], dtype=np.int64)


def canonical_faces(faces: np.ndarray, return_order: bool = False):
    """Rotate each triple to start at its lowest index (winding kept), then sort rows."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.shape[0] == 0:
        return (faces, np.zeros(0, dtype=np.int64)) if return_order else faces
    shift = np.argmin(faces, axis=1)
    cols = (shift[:, None] + np.arange(3)[None, :]) % 3
    rolled = np.take_along_axis(faces, cols, axis=1)
    order = np.lexsort((rolled[:, 2], rolled[:, 1], rolled[:, 0]))
    return (rolled[order], order) if return_order else rolled[order]


def face_planes(points: np.ndarray, faces: np.ndarray):
    """Unit normals (right-hand rule on the winding) and plane offsets."""
    a, b, c = points[faces[:, 0]], points[faces[:, 1]], points[faces[:, 2]]
    n = np.cross(b - a, c - a)
    ln = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, ln, out=np.zeros_like(n), where=ln > 0)
    centroid = (a + b + c) / 3.0
    return n, np.einsum("ij,ij->i", n, centroid)


def quickhull3(points, config: HullConfig = HullConfig()) -> HullMesh:
    """Convex hull of a full-dimensional 3D point set.

    Raises:
        SizeError: fewer than 4 points.
        DegeneracyError: the points span fewer than 3 dimensions within the
            tolerance; ``dimension`` on the exception names the detected rank.
    """
    pts = np.ascontiguousarray(as_points(points))
    if pts.shape[0] < 4:
        raise SizeError(f"convex hull needs at least 4 points, got {pts.shape[0]}")
    eps = config.tolerance(pts)
    simplex = _initial_simplex(pts, eps)
    faces, on_hull, _ = _quickhull_core(pts, simplex, eps)
    faces = canonical_faces(faces)

    used = np.unique(faces)
    remap = np.full(pts.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    local = remap[faces]
    normals, _ = face_planes(pts, faces)
    return HullMesh(
        vertices=pts[used],
        faces=local,
        face_normals=normals,
        source_index=used,
        vertex_on_hull=on_hull,
        epsilon=eps,
    )


def hull_contains(hull: HullMesh, q, eps: float) -> bool:
    """True iff ``q`` is within ``eps`` of the inner side of every face plane."""
    _, counts = edge_face_counts(hull.faces)
    if hull.n_faces < 4 or (counts != 2).any():
        raise StructuralError("hull_contains requires a closed hull")
    q = np.asarray(q, dtype=np.float64).reshape(3)
    _, offsets = face_planes(hull.vertices, hull.faces)
    dist = hull.face_normals @ q - offsets
    return bool((dist <= eps).all())
