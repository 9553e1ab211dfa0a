import numpy as np
import pytest

from ovpc_mesh.cli import run_cli
from ovpc_mesh.errors import DataError, EmptyCloudError, ParseError, StructuralError
from ovpc_mesh.evaluation import SceneSpec, gen_scene
from ovpc_mesh.geometry import PointCloud, TriangleMesh, mesh_topology_check
from ovpc_mesh.hull import quickhull3
from ovpc_mesh.io import (
    RunConfig,
    read_cloud,
    read_config,
    read_mesh,
    read_navmap,
    read_ply,
    read_poses,
    write_cloud,
    write_mesh,
    write_navmap,
)
from ovpc_mesh.traversability import FaceLabel, NavMap

PTS = np.array([[0.1, 0.2, 0.3], [-1.5, 2.25, 1e-7], [123.456789, -0.000123, 9.87654321]])


@pytest.mark.parametrize("ext", [".xyz", ".txt", ".ply"])
def test_cloud_roundtrip(tmp_path, ext):
    path = tmp_path / f"c{ext}"
    write_cloud(path, PointCloud(PTS, [1.0, 2.0, 3.5]))
    back = read_cloud(path)
    np.testing.assert_allclose(back.points, PTS, rtol=1e-8, atol=1e-6)
    np.testing.assert_allclose(back.intensity, [1.0, 2.0, 3.5])


def test_cloud_without_intensity(tmp_path):
    path = tmp_path / "c.xyz"
    write_cloud(path, PointCloud(PTS))
    assert read_cloud(path).intensity is None


def test_short_line_names_line(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("x y z\n1 2 3\n1 2\n")
    with pytest.raises(ParseError) as exc:
        read_cloud(path)
    assert exc.value.line == 3


def test_non_numeric_and_non_finite(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("x y z\n1 2 three\n")
    with pytest.raises(ParseError, match=":2"):
        read_cloud(path)
    path.write_text("x y z\n1 2 3\n1 nan 3\n")
    with pytest.raises(ParseError) as exc:
        read_cloud(path)
    assert exc.value.line == 3


def test_bad_header(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("a b c\n1 2 3\n")
    with pytest.raises(ParseError):
        read_cloud(path)


def test_empty_file(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("")
    with pytest.raises(EmptyCloudError):
        read_cloud(path)


def test_unknown_extension(tmp_path):
    with pytest.raises(DataError):
        read_cloud(tmp_path / "c.bin")


def _tet_mesh():
    hull = quickhull3(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]))
    return TriangleMesh(hull.vertices, hull.faces, hull.face_normals, hull.source_index, viewpoint=[0.2, 0.2, 0.2])


def test_mesh_with_one_blocked_face(tmp_path):
    mesh = _tet_mesh()
    labels = [FaceLabel(True, 0.0)] * 3 + [FaceLabel(False, 1.0)]
    path = tmp_path / "m.ply"
    write_mesh(path, mesh, labels)
    face_lines = [ln for ln in path.read_text().splitlines() if ln.startswith("3 ")]
    assert len(face_lines) == 4
    assert sum(ln.split()[-1] == "0" for ln in face_lines) == 1
    back, flabels, _, _ = read_mesh(path)
    assert flabels.traversable.tolist() == [True, True, True, False]
    rep = mesh_topology_check(back)
    assert rep.is_closed and rep.euler_characteristic == 2
    np.testing.assert_array_equal(back.faces, mesh.faces)
    np.testing.assert_allclose(back.viewpoint, [0.2, 0.2, 0.2])


def test_mesh_output_deterministic(tmp_path):
    mesh = _tet_mesh()
    labels = [FaceLabel(True, 0.0)] * 4
    write_mesh(tmp_path / "a.ply", mesh, labels)
    write_mesh(tmp_path / "b.ply", mesh, labels)
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()


def test_mesh_label_mismatch(tmp_path):
    with pytest.raises(StructuralError):
        write_mesh(tmp_path / "m.ply", _tet_mesh(), [FaceLabel(True, 0.0)] * 3)


def test_navmap_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    n = rng.normal(size=(25, 3))
    nav = NavMap(rng.uniform(-1, 1, (25, 3)), n / np.linalg.norm(n, axis=1, keepdims=True), rng.uniform(size=25) < 0.5, [0, 0, 1.0])
    path = tmp_path / "n.ply"
    write_navmap(path, nav)
    els, _ = read_ply(path)
    assert els["vertex"].count == 25 and els["face"].count == 0
    back = read_navmap(path)
    np.testing.assert_allclose(back.points, nav.points, atol=1e-6)
    np.testing.assert_array_equal(back.traversable, nav.traversable)
    np.testing.assert_allclose(back.viewpoint, [0, 0, 1.0])


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ngamma = -0.02\nviewpoint = 1, 2, 3\nbuffer_capacity = 10\n")
    cfg = read_config(p)
    assert cfg.gamma == -0.02 and cfg.viewpoint == (1.0, 2.0, 3.0) and cfg.buffer_capacity == 10
    assert cfg.merged(gamma=-0.01, seed=None).gamma == -0.01
    p.write_text("gama = 1\n")
    with pytest.raises(ParseError):
        read_config(p)
    p.write_text("gamma = 0.5\n")
    with pytest.raises(ParseError):
        read_config(p)


def test_config_text_roundtrip(tmp_path):
    cfg = RunConfig(gamma=-0.01, viewpoint=(0.0, 0.5, 1.88), seed=7)
    p = tmp_path / "c.txt"
    p.write_text(cfg.to_text())
    assert read_config(p) == cfg


def test_poses_file(tmp_path):
    p = tmp_path / "poses.csv"
    p.write_text("timestamp,x,y,z,qw,qx,qy,qz\n0,1,2,3,1,0,0,0\n")
    assert read_poses(p).shape == (1, 8)
    p.write_text("t,x\n")
    with pytest.raises(ParseError):
        read_poses(p)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


@pytest.fixture()
def sphere_file(tmp_path):
    v = np.random.default_rng(0).normal(size=(100, 3))
    path = tmp_path / "sphere.xyz"
    write_cloud(path, PointCloud(5 * v / np.linalg.norm(v, axis=1, keepdims=True)))
    return path


def test_cli_mesh(tmp_path, sphere_file):
    out = tmp_path / "m.ply"
    assert run_cli(["mesh", "--in", str(sphere_file), "--viewpoint", "0,0,0", "--out", str(out)]) == 0
    mesh, _, _, _ = read_mesh(out)
    rep = mesh_topology_check(mesh)
    assert rep.is_closed and rep.euler_characteristic == 2


def test_cli_missing_viewpoint(tmp_path, sphere_file, capsys):
    assert run_cli(["mesh", "--in", str(sphere_file), "--out", str(tmp_path / "m.ply")]) == 1
    assert "--viewpoint" in capsys.readouterr().err


def test_cli_unknown_flag(capsys):
    assert run_cli(["mesh", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_cli_parse_error_exit_2(tmp_path):
    bad = tmp_path / "bad.xyz"
    bad.write_text("x y z\n1 2\n")
    assert run_cli(["mesh", "--in", str(bad), "--viewpoint", "0,0,0", "--out", str(tmp_path / "m.ply")]) == 2


def test_cli_geometry_error_exit_3(tmp_path):
    flat = tmp_path / "flat.xyz"
    xy = np.random.default_rng(1).uniform(-3, 3, (30, 2))
    write_cloud(flat, PointCloud(np.column_stack([xy, np.zeros(30)])))
    assert run_cli(["mesh", "--in", str(flat), "--viewpoint", "0,0,0", "--out", str(tmp_path / "m.ply")]) == 3


def test_cli_navmap_and_queries(tmp_path, sphere_file, capsys):
    nav = tmp_path / "n.ply"
    mesh = tmp_path / "m.ply"
    args = ["navmap", "--in", str(sphere_file), "--viewpoint", "0,0,0", "--out", str(nav), "--mesh-out", str(mesh)]
    assert run_cli(args) == 0
    assert len(read_navmap(nav)) == 100
    capsys.readouterr()
    assert run_cli(["query", "--navmap", str(nav), "--nearest", "5,0,0"]) == 0
    assert capsys.readouterr().out.startswith("index ")
    assert run_cli(["query", "--navmap", str(nav), "--project", "0,0,30,-5"]) == 0
    assert "body_z" in capsys.readouterr().out
    assert run_cli(["query", "--navmap", str(nav), "--collide", "0,0,-5,1,0,0,0", "2,2,2,-1"]) == 0
    assert "in_collision 1" in capsys.readouterr().out
    assert run_cli(["query", "--navmap", str(nav), "--collide", "0,0,0,1,0,0,0", "2,-2,2"]) == 1


def test_cli_synth_eval_counting(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["synth-eval", "--slope-min", "0", "--slope-max", "0", "--step", "1", "--trials", "1", "--out", str(out)]
    assert run_cli(args) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0] == "slope_deg,method,mean_error_deg,std_error_deg,n_points"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["ovpc", "pca"]


def test_cli_synth_eval_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        run_cli(["synth-eval", "--slope-min", "3", "--slope-max", "3", "--trials", "1", "--seed", "9", "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def _write_scans(tmp_path, n=3):
    sc = gen_scene(SceneSpec(scans=n, seed=2))
    scans = tmp_path / "scans"
    scans.mkdir()
    rows = ["timestamp,x,y,z,qw,qx,qy,qz"]
    for k in range(n):
        write_cloud(scans / f"scan_{k:03d}.xyz", sc.bundled_cloud.subset(sc.scan_id == k))
        rows.append(f"{k * 0.1},{0.05 * k},0,0,1,0,0,0")
    poses = tmp_path / "poses.csv"
    poses.write_text("\n".join(rows) + "\n")
    return scans, poses


def test_cli_pipeline(tmp_path):
    scans, poses = _write_scans(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("gamma = -0.02\nviewpoint = 0,0,1.88\nmin_points_per_voxel = 1\n")
    out = tmp_path / "out"
    args = ["pipeline", "--scans", str(scans), "--poses", str(poses), "--config", str(cfg), "--out-dir", str(out), "--gamma", "-0.03"]
    assert run_cli(args) == 0
    echoed = read_config(out / "effective_config.txt")
    assert echoed.gamma == -0.03 and echoed.min_points_per_voxel == 1 and echoed.viewpoint == (0.0, 0.0, 1.88)
    for k in range(3):
        mesh, _, _, _ = read_mesh(out / f"frame_{k:04d}_mesh.ply")
        assert mesh_topology_check(mesh).is_closed
        assert len(read_navmap(out / f"frame_{k:04d}_navmap.ply")) == mesh.n_vertices


def test_cli_pipeline_pose_count_mismatch(tmp_path):
    scans, poses = _write_scans(tmp_path)
    poses.write_text("timestamp,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n")
    assert run_cli(["pipeline", "--scans", str(scans), "--poses", str(poses), "--out-dir", str(tmp_path / "o")]) == 2


def test_cli_bench(tmp_path, sphere_file):
    d = tmp_path / "clouds"
    d.mkdir()
    sphere_file.rename(d / "sphere.xyz")
    out = tmp_path / "b.csv"
    assert run_cli(["bench", "--in", str(d), "--iterations", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "cloud_id,points,iteration,ms" and len(lines) == 5
