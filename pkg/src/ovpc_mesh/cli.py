"""Command-line entry point: ``ovpc <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 geometry error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .bench import BenchError, time_pipeline
from .buffer import BufferConfig, Scan, ScanBuffer
from .errors import DataError, GeometryError, OvpcError, StateError
from .evaluation import SceneSpec, run_normal_sweep
from .geometry import Pose3
from .ghpr import GhprConfig, build_ovpc_mesh
from .io import (
    CLOUD_EXTS,
    RunConfig,
    parse_triple,
    read_cloud,
    read_config,
    read_navmap,
    read_poses,
    write_mesh,
    write_navmap,
)
from .navmap import RobotBox, Se2State, collision_check, nearest_visible, project_state
from .traversability import TraversabilityConfig, build_navmap, face_labels

log = logging.getLogger("ovpc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GEOMETRY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _triple(text):
    try:
        return parse_triple(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _floats(n_min, n_max):
    def conv(text):
        try:
            vals = [float(t) for t in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
        if not n_min <= len(vals) <= n_max or not all(math.isfinite(v) for v in vals):
            raise argparse.ArgumentTypeError(f"expected {n_min}..{n_max} finite values, got {text!r}")
        return vals

    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ovpc", description="Visible-point meshes and traversability maps from point clouds.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh", help="build the OVPC mesh of one cloud")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--viewpoint", type=_triple, required=True)
    m.add_argument("--gamma", type=float, default=-0.03)
    m.add_argument("--alpha-max-deg", type=float, default=30.0)
    m.add_argument("--dh-max", type=float, default=0.25)
    m.add_argument("--out", required=True)

    n = sub.add_parser("navmap", help="build the classified point map of one cloud")
    n.add_argument("--in", dest="input", required=True)
    n.add_argument("--viewpoint", type=_triple, required=True)
    n.add_argument("--gamma", type=float, default=-0.03)
    n.add_argument("--alpha-max-deg", type=float, default=30.0)
    n.add_argument("--dh-max", type=float, default=0.25)
    n.add_argument("--out", required=True)
    n.add_argument("--mesh-out")

    pl = sub.add_parser("pipeline", help="buffer, assemble, mesh and classify a scan sequence")
    pl.add_argument("--scans", required=True, help="directory of per-scan cloud files (sorted by name)")
    pl.add_argument("--poses", required=True, help="CSV: timestamp,x,y,z,qw,qx,qy,qz, one row per scan")
    pl.add_argument("--config", help="key = value file; flags below override it")
    pl.add_argument("--out-dir", required=True)
    pl.add_argument("--gamma", type=float)
    pl.add_argument("--alpha-max-deg", type=float)
    pl.add_argument("--dh-max", type=float)
    pl.add_argument("--voxel-size", type=float)
    pl.add_argument("--min-points-per-voxel", type=int)
    pl.add_argument("--buffer-capacity", type=int)
    pl.add_argument("--viewpoint", type=_triple, help="sensor origin in the robot frame")
    pl.add_argument("--seed", type=int)

    q = sub.add_parser("query", help="nearest point, state projection or collision check")
    q.add_argument("--navmap", required=True)
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--nearest", type=_triple, metavar="X,Y,Z")
    g.add_argument("--project", type=_floats(4, 4), metavar="X,Y,THETA_DEG,ZREF")
    g.add_argument(
        "--collide", nargs=2, metavar=("POSE", "BOX"),
        help="POSE = x,y,z,qw,qx,qy,qz ; BOX = length,width,height[,z_offset]",
    )

    s = sub.add_parser("synth-eval", help="normal-accuracy sweep over incline slopes")
    s.add_argument("--slope-min", type=float, default=0.0)
    s.add_argument("--slope-max", type=float, default=35.0)
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--trials", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gamma", type=float, default=-0.03)
    s.add_argument("--pca-radius", type=float, default=0.3)
    s.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="time mesh + navmap construction")
    b.add_argument("--in", dest="input", required=True, help="directory of cloud files")
    b.add_argument("--iterations", type=int, default=10)
    b.add_argument("--viewpoint", type=_triple, default=(0.0, 0.0, 0.0))
    b.add_argument("--gamma", type=float, default=-0.03)
    b.add_argument("--out", required=True)
    b.add_argument("--summary-out")
    return p


def _cloud_files(directory) -> list:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d}: not a directory")
    files = sorted(f for f in d.iterdir() if f.suffix.lower() in CLOUD_EXTS + (".ply",))
    if not files:
        raise DataError(f"{d}: no cloud files")
    return files


def _trav(alpha_deg, dh):
    return TraversabilityConfig.from_degrees(alpha_deg, dh)


def cmd_mesh(a) -> int:
    cloud = read_cloud(a.input).finite()
    mesh = build_ovpc_mesh(cloud, GhprConfig(viewpoint=a.viewpoint, gamma=a.gamma))
    write_mesh(a.out, mesh, face_labels(mesh, _trav(a.alpha_max_deg, a.dh_max)))
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces -> {a.out}")
    return EXIT_OK


def cmd_navmap(a) -> int:
    cloud = read_cloud(a.input).finite()
    mesh = build_ovpc_mesh(cloud, GhprConfig(viewpoint=a.viewpoint, gamma=a.gamma))
    cfg = _trav(a.alpha_max_deg, a.dh_max)
    nav = build_navmap(mesh, cfg)
    write_navmap(a.out, nav)
    if a.mesh_out:
        write_mesh(a.mesh_out, mesh, face_labels(mesh, cfg), nav.normals, nav.traversable)
    print(f"navmap: {len(nav)} points, {int(nav.traversable.sum())} traversable -> {a.out}")
    return EXIT_OK


def cmd_pipeline(a) -> int:
    cfg = read_config(a.config) if a.config else RunConfig()
    cfg = cfg.merged(
        gamma=a.gamma, alpha_max_deg=a.alpha_max_deg, dh_max=a.dh_max, voxel_size=a.voxel_size,
        min_points_per_voxel=a.min_points_per_voxel, buffer_capacity=a.buffer_capacity,
        viewpoint=a.viewpoint, seed=a.seed,
    )
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.txt").write_text(cfg.to_text())
    files = _cloud_files(a.scans)
    poses = read_poses(a.poses)
    if len(poses) != len(files):
        raise DataError(f"{len(files)} scan files but {len(poses)} pose rows")
    bcfg = BufferConfig(cfg.buffer_capacity, cfg.voxel_size, cfg.min_points_per_voxel)
    buf = ScanBuffer(bcfg)
    ghpr_cfg = GhprConfig(viewpoint=cfg.viewpoint, gamma=cfg.gamma)
    trav_cfg = _trav(cfg.alpha_max_deg, cfg.dh_max)
    for k, (path, row) in enumerate(zip(files, poses)):
        pose = Pose3(row[1:4], row[4:8] / np.linalg.norm(row[4:8]))
        buf.push_scan(Scan(read_cloud(path).finite(), pose, float(row[0])))
        bundled = buf.assemble(pose)
        mesh = build_ovpc_mesh(bundled, ghpr_cfg)
        nav = build_navmap(mesh, trav_cfg)
        write_mesh(out / f"frame_{k:04d}_mesh.ply", mesh, face_labels(mesh, trav_cfg), nav.normals, nav.traversable)
        write_navmap(out / f"frame_{k:04d}_navmap.ply", nav)
        print(f"frame {k}: {len(bundled)} bundled points, {len(nav)} visible, {int(nav.traversable.sum())} traversable")
    return EXIT_OK


def _vec(v) -> str:
    return " ".join(f"{c:.9g}" for c in v)


def _parse_collide(pose_text, box_text):
    try:
        pv = [float(t) for t in pose_text.split(",")]
        bv = [float(t) for t in box_text.split(",")]
    except ValueError:
        raise UsageError("--collide expects comma-separated numbers") from None
    if len(pv) != 7 or len(bv) not in (3, 4):
        raise UsageError("--collide expects POSE = x,y,z,qw,qx,qy,qz and BOX = l,w,h[,z_offset]")
    q = np.array(pv[3:])
    try:
        return Pose3(pv[:3], q / np.linalg.norm(q)), RobotBox(*bv)
    except GeometryError as exc:
        raise UsageError(f"--collide: {exc}") from None


def cmd_query(a) -> int:
    if a.collide:
        pose, box = _parse_collide(*a.collide)
    nav = read_navmap(a.navmap)
    if a.nearest is not None:
        hit = nearest_visible(nav, a.nearest)
        print(f"index {hit.index}\npoint {_vec(hit.point)}\nnormal {_vec(hit.normal)}")
        print(f"traversable {int(hit.traversable)}\ndistance {hit.distance:.9g}")
    elif a.project is not None:
        x, y, theta, zref = a.project
        pose = project_state(nav, Se2State(x, y, math.radians(theta)), zref)
        print(f"translation {_vec(pose.translation)}\nquaternion {_vec(pose.rotation)}")
        for name, col in zip("xyz", pose.matrix.T):
            print(f"body_{name} {_vec(col)}")
    else:
        rep = collision_check(nav, pose, box)
        print(f"in_collision {int(rep.in_collision)}")
        print("offending " + " ".join(str(i) for i in rep.offending_indices))
    return EXIT_OK


def cmd_synth_eval(a) -> int:
    if a.trials < 1 or not a.step > 0:
        raise UsageError("--trials must be >= 1 and --step positive")
    table = run_normal_sweep(
        SceneSpec(seed=a.seed), a.slope_min, a.slope_max, a.step, a.trials, gamma=a.gamma, pca_radius=a.pca_radius
    )
    table.to_csv(a.out)
    print(table.summary())
    return EXIT_OK


def cmd_bench(a) -> int:
    if a.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    files = _cloud_files(a.input)
    clouds = [read_cloud(f).finite() for f in files]
    try:
        stats = time_pipeline(clouds, GhprConfig(viewpoint=a.viewpoint, gamma=a.gamma), iterations=a.iterations)
    except BenchError as exc:
        log.error("benchmark failed on %s", files[exc.cloud_id])
        raise exc.cause from exc
    stats.write_samples(a.out)
    text = stats.summary()
    print(text)
    if a.summary_out:
        Path(a.summary_out).write_text(text + "\n")
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "navmap": cmd_navmap,
    "pipeline": cmd_pipeline,
    "query": cmd_query,
    "synth-eval": cmd_synth_eval,
    "bench": cmd_bench,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ovpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, StateError, OSError) as exc:
        print(f"ovpc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GeometryError as exc:
        print(f"ovpc: geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except OvpcError as exc:
        print(f"ovpc: error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
