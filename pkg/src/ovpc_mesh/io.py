"""ASCII file formats: point clouds, classified meshes/maps, run configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DataError, DomainError, EmptyCloudError, ParseError, StructuralError
from .geometry import PointCloud, TriangleMesh, validate_faces
from .traversability import FaceLabels, NavMap

CLOUD_EXTS = (".xyz", ".txt", ".asc", ".pts")


def fmt(x: float) -> str:
    return f"{x:.9g}"


# ---------------------------------------------------------------------------
# plain xyz clouds
# ---------------------------------------------------------------------------


def _parse_float(tok: str, lineno: int, path) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric token {tok!r}", lineno, path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", lineno, path)
    return v


def _read_xyz(path) -> PointCloud:
    with open(path) as fh:
        lines = fh.read().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise EmptyCloudError(f"{path}: file is empty")
    lineno, header = rows[0]
    if header not in (["x", "y", "z"], ["x", "y", "z", "intensity"]):
        raise ParseError(f"expected header 'x y z [intensity]', got {' '.join(header)!r}", lineno, path)
    ncol = len(header)
    data = np.empty((len(rows) - 1, ncol))
    for k, (lineno, toks) in enumerate(rows[1:]):
        if len(toks) != ncol:
            raise ParseError(f"expected {ncol} columns, got {len(toks)}", lineno, path)
        data[k] = [_parse_float(t, lineno, path) for t in toks]
    if data.shape[0] == 0:
        raise EmptyCloudError(f"{path}: no points after the header")
    return PointCloud(data[:, :3], data[:, 3] if ncol == 4 else None)


def _write_xyz(path, cloud: PointCloud) -> None:
    has_i = cloud.intensity is not None
    out = ["x y z intensity" if has_i else "x y z"]
    for k, p in enumerate(cloud.points):
        vals = [fmt(p[0]), fmt(p[1]), fmt(p[2])]
        if has_i:
            vals.append(fmt(cloud.intensity[k]))
        out.append(" ".join(vals))
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# ASCII PLY
# ---------------------------------------------------------------------------


@dataclass
class PlyElement:
    name: str
    count: int
    props: List[Tuple[str, str, Optional[str]]]  # (name, type, list count type)
    rows: List[list]


def read_ply(path) -> Tuple[Dict[str, PlyElement], List[str]]:
    """Parse an ASCII PLY file into its elements and comment lines."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EmptyCloudError(f"{path}: file is empty")
    if lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1, path)
    elements: List[PlyElement] = []
    comments: List[str] = []
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError("header has no end_header", i, path)
        toks = lines[i].split()
        i += 1
        if not toks:
            continue
        key = toks[0]
        if key == "end_header":
            break
        if key == "format":
            if toks[1:2] != ["ascii"]:
                raise ParseError(f"only ascii PLY is supported, got {' '.join(toks[1:])!r}", i, path)
        elif key in ("comment", "obj_info"):
            comments.append(lines[i - 1].split(None, 1)[1] if len(toks) > 1 else "")
        elif key == "element":
            if len(toks) != 3:
                raise ParseError("malformed element line", i, path)
            try:
                count = int(toks[2])
            except ValueError:
                raise ParseError(f"bad element count {toks[2]!r}", i, path) from None
            elements.append(PlyElement(toks[1], count, [], []))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", i, path)
            if toks[1] == "list" and len(toks) == 5:
                elements[-1].props.append((toks[4], toks[3], toks[2]))
            elif len(toks) == 3:
                elements[-1].props.append((toks[2], toks[1], None))
            else:
                raise ParseError("malformed property line", i, path)
        else:
            raise ParseError(f"unknown header keyword {key!r}", i, path)
    for el in elements:
        for _ in range(el.count):
            while i < len(lines) and not lines[i].strip():
                i += 1
            if i >= len(lines):
                raise ParseError(f"file ends inside element {el.name!r}", i, path)
            toks = lines[i].split()
            i += 1
            row, pos = [], 0
            for name, _typ, list_t in el.props:
                if pos >= len(toks):
                    raise ParseError(f"too few values for element {el.name!r}", i, path)
                if list_t is None:
                    row.append(_parse_float(toks[pos], i, path))
                    pos += 1
                else:
                    try:
                        n = int(toks[pos])
                    except ValueError:
                        raise ParseError(f"bad list length {toks[pos]!r}", i, path) from None
                    vals = toks[pos + 1 : pos + 1 + n]
                    if len(vals) != n:
                        raise ParseError(f"list {name!r} is short", i, path)
                    row.append([_parse_float(t, i, path) for t in vals])
                    pos += 1 + n
            if pos != len(toks):
                raise ParseError(f"expected {pos} values, got {len(toks)}", i, path)
            el.rows.append(row)
    return {el.name: el for el in elements}, comments


def _column(el: PlyElement, name: str, path) -> np.ndarray:
    names = [p[0] for p in el.props]
    if name not in names:
        raise ParseError(f"element {el.name!r} has no property {name!r}", None, path)
    k = names.index(name)
    return np.array([r[k] for r in el.rows], dtype=np.float64)


def _ply_header(comments, elements) -> List[str]:
    out = ["ply", "format ascii 1.0"]
    out += [f"comment {c}" for c in comments]
    for name, count, props in elements:
        out.append(f"element {name} {count}")
        out += [f"property {p}" for p in props]
    out.append("end_header")
    return out


def _read_ply_cloud(path) -> PointCloud:
    els, _ = read_ply(path)
    if "vertex" not in els or not els["vertex"].rows:
        raise EmptyCloudError(f"{path}: no vertex records")
    v = els["vertex"]
    pts = np.column_stack([_column(v, c, path) for c in "xyz"])
    inten = _column(v, "intensity", path) if "intensity" in [p[0] for p in v.props] else None
    return PointCloud(pts, inten)


def _write_ply_cloud(path, cloud: PointCloud) -> None:
    props = ["float x", "float y", "float z"]
    if cloud.intensity is not None:
        props.append("float intensity")
    out = _ply_header([], [("vertex", len(cloud), props)])
    for k, p in enumerate(cloud.points):
        vals = [fmt(c) for c in p]
        if cloud.intensity is not None:
            vals.append(fmt(cloud.intensity[k]))
        out.append(" ".join(vals))
    Path(path).write_text("\n".join(out) + "\n")


def read_cloud(path) -> PointCloud:
    ext = Path(path).suffix.lower()
    if ext == ".ply":
        return _read_ply_cloud(path)
    if ext in CLOUD_EXTS:
        return _read_xyz(path)
    raise DataError(f"{path}: unrecognized cloud extension {ext!r}")


def write_cloud(path, cloud: PointCloud) -> None:
    ext = Path(path).suffix.lower()
    if ext == ".ply":
        _write_ply_cloud(path, cloud)
    elif ext in CLOUD_EXTS:
        _write_xyz(path, cloud)
    else:
        raise DataError(f"{path}: unrecognized cloud extension {ext!r}")


# ---------------------------------------------------------------------------
# classified mesh / navmap
# ---------------------------------------------------------------------------

_VERTEX_PROPS = ["float x", "float y", "float z", "float nx", "float ny", "float nz", "uchar traversable"]


def _viewpoint_comment(vp) -> List[str]:
    return [] if vp is None else ["viewpoint " + " ".join(fmt(c) for c in vp)]


def write_mesh(path, mesh: TriangleMesh, labels, vertex_normals=None, vertex_traversable=None) -> None:
    """Classified mesh as ASCII PLY with per-vertex and per-face traversability.

    Vertex normals and flags are derived from ``labels`` unless given.
    """
    from .traversability import vertex_attributes

    labels = FaceLabels.from_labels(labels)
    if len(labels) != mesh.n_faces:
        raise StructuralError(f"{len(labels)} labels for {mesh.n_faces} faces")
    validate_faces(mesh.faces, mesh.n_vertices)
    if vertex_normals is None or vertex_traversable is None:
        vertex_normals, vertex_traversable = vertex_attributes(mesh, labels)
    out = _ply_header(
        _viewpoint_comment(mesh.viewpoint),
        [
            ("vertex", mesh.n_vertices, _VERTEX_PROPS),
            ("face", mesh.n_faces, ["list uchar int vertex_indices", "uchar traversable"]),
        ],
    )
    for p, n, t in zip(mesh.vertices, vertex_normals, vertex_traversable):
        out.append(" ".join([fmt(c) for c in p] + [fmt(c) for c in n] + [str(int(t))]))
    for f, t in zip(mesh.faces, labels.traversable):
        out.append(f"3 {f[0]} {f[1]} {f[2]} {int(t)}")
    Path(path).write_text("\n".join(out) + "\n")


def write_navmap(path, nav: NavMap) -> None:
    out = _ply_header(
        _viewpoint_comment(nav.viewpoint),
        [("vertex", len(nav), _VERTEX_PROPS), ("face", 0, ["list uchar int vertex_indices", "uchar traversable"])],
    )
    for p, n, t in zip(nav.points, nav.normals, nav.traversable):
        out.append(" ".join([fmt(c) for c in p] + [fmt(c) for c in n] + [str(int(t))]))
    Path(path).write_text("\n".join(out) + "\n")


def _viewpoint_from(comments) -> Optional[np.ndarray]:
    for c in comments:
        toks = c.split()
        if toks and toks[0] == "viewpoint" and len(toks) == 4:
            return np.array([float(t) for t in toks[1:]])
    return None


def _flags(col: np.ndarray, what: str, path) -> np.ndarray:
    if not np.isin(col, (0.0, 1.0)).all():
        raise ParseError(f"{what} traversable flag outside {{0, 1}}", None, path)
    return col.astype(bool)


def _vertex_block(els, path):
    if "vertex" not in els:
        raise ParseError("no vertex element", None, path)
    v = els["vertex"]
    pts = np.column_stack([_column(v, c, path) for c in "xyz"]) if v.rows else np.zeros((0, 3))
    nrm = np.column_stack([_column(v, c, path) for c in ("nx", "ny", "nz")]) if v.rows else np.zeros((0, 3))
    trav = _flags(_column(v, "traversable", path), "vertex", path)
    return pts, nrm, trav


def read_mesh(path):
    """Returns ``(mesh, face_labels, vertex_normals, vertex_traversable)``.

    Face normals are recomputed from the stored winding.
    """
    els, comments = read_ply(path)
    pts, nrm, vtrav = _vertex_block(els, path)
    f = els.get("face")
    if f is None:
        raise ParseError("no face element", None, path)
    names = [p[0] for p in f.props]
    k = names.index("vertex_indices") if "vertex_indices" in names else 0
    faces = np.array([r[k] for r in f.rows], dtype=np.int64).reshape(-1, 3) if f.rows else np.zeros((0, 3), np.int64)
    validate_faces(faces, len(pts))
    ftrav = _flags(_column(f, "traversable", path), "face", path) if f.rows else np.zeros(0, bool)
    tri = pts[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    ln = np.linalg.norm(fn, axis=1, keepdims=True)
    fn = np.divide(fn, ln, out=np.zeros_like(fn), where=ln > 0)
    angle = np.arccos(np.clip(fn[:, 2], -1.0, 1.0))
    mesh = TriangleMesh(pts, faces, fn, np.arange(len(pts)), _viewpoint_from(comments))
    return mesh, FaceLabels(ftrav, angle), nrm, vtrav


def read_navmap(path) -> NavMap:
    els, comments = read_ply(path)
    pts, nrm, trav = _vertex_block(els, path)
    if len(pts) == 0:
        raise EmptyCloudError(f"{path}: navmap has no points")
    vp = _viewpoint_from(comments)
    return NavMap(pts, nrm, trav, vp if vp is not None else np.zeros(3))


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    gamma: float = -0.03
    alpha_max_deg: float = 30.0
    dh_max: float = 0.25
    voxel_size: float = 0.2
    min_points_per_voxel: int = 2
    buffer_capacity: int = 25
    viewpoint: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if not self.gamma < 0:
            raise DomainError("gamma must be negative")
        if not 0 < self.alpha_max_deg <= 90:
            raise DomainError("alpha_max_deg must lie in (0, 90]")
        if not self.dh_max > 0 or not self.voxel_size > 0:
            raise DomainError("dh_max and voxel_size must be positive")
        if self.min_points_per_voxel < 1 or self.buffer_capacity < 1:
            raise DomainError("min_points_per_voxel and buffer_capacity must be >= 1")
        if len(self.viewpoint) != 3:
            raise DomainError("viewpoint needs 3 coordinates")

    def merged(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if k == "viewpoint":
                v = ",".join(fmt(c) for c in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def parse_triple(text: str) -> Tuple[float, float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise ValueError(f"expected X,Y,Z, got {text!r}")
    vals = tuple(float(p) for p in parts)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"non-finite coordinate in {text!r}")
    return vals


def read_config(path) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", lineno, path)
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ParseError(f"unknown key {key!r}", lineno, path)
            try:
                if key == "viewpoint":
                    values[key] = parse_triple(val)
                elif key in ("min_points_per_voxel", "buffer_capacity", "seed"):
                    values[key] = int(val)
                else:
                    values[key] = float(val)
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {exc}", lineno, path) from None
    try:
        return RunConfig(**values)
    except DomainError as exc:
        raise ParseError(str(exc), None, path) from None


# ---------------------------------------------------------------------------
# pose log
# ---------------------------------------------------------------------------

POSE_HEADER = ("timestamp", "x", "y", "z", "qw", "qx", "qy", "qz")


def read_poses(path) -> np.ndarray:
    """Rows of ``timestamp,x,y,z,qw,qx,qy,qz`` as an ``(n, 8)`` array."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EmptyCloudError(f"{path}: pose file is empty")
    header = tuple(t.strip() for t in lines[0].split(","))
    if header != POSE_HEADER:
        raise ParseError(f"expected header {','.join(POSE_HEADER)}", 1, path)
    rows = []
    for lineno, ln in enumerate(lines[1:], 2):
        if not ln.strip():
            continue
        toks = ln.split(",")
        if len(toks) != 8:
            raise ParseError(f"expected 8 columns, got {len(toks)}", lineno, path)
        rows.append([_parse_float(t.strip(), lineno, path) for t in toks])
    return np.array(rows).reshape(-1, 8)
