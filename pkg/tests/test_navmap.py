import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovpc_mesh.errors import DegeneracyError, DomainError, StateError
from ovpc_mesh.geometry import Pose3
from ovpc_mesh.navmap import (
    RobotBox,
    Se2State,
    collision_check,
    nearest_visible,
    normalize_heading,
    project_state,
    surface_frame,
)
from ovpc_mesh.traversability import NavMap

from oracles import box_members, nearest_linear, random_rotation


def _map(points, normals=None, trav=None):
    points = np.asarray(points, dtype=float)
    n = len(points)
    normals = np.tile([0.0, 0.0, 1.0], (n, 1)) if normals is None else normals
    trav = np.ones(n, bool) if trav is None else trav
    return NavMap(points, normals, trav, np.zeros(3))


def _ground(step=0.5, half=5.0):
    g = np.arange(-half, half + 1e-9, step)
    x, y = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])


def test_heading_normalisation():
    assert Se2State(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)
    assert Se2State(0, 0, -math.pi).heading == pytest.approx(math.pi)
    assert normalize_heading(-3 * math.pi / 2) == pytest.approx(math.pi / 2)


def test_box_extents_positive():
    with pytest.raises(DomainError):
        RobotBox(1.0, 0.0, 1.0)


def test_nearest_exact_hit():
    nav = _map(_ground())
    hit = nearest_visible(nav, nav.points[17])
    assert hit.index == 17 and hit.distance == 0.0


def test_nearest_tie_lowest_index():
    pts = np.zeros((10, 3))
    pts[:, 0] = np.arange(10) + 100.0
    pts[3] = [1.0, 0.0, 0.0]
    pts[7] = [-1.0, 0.0, 0.0]
    assert nearest_visible(_map(pts), [0.0, 0.0, 0.0]).index == 3


def test_nearest_duplicate_points_lowest_index():
    pts = np.array([[5.0, 0, 0], [1.0, 1, 1], [2.0, 2, 2], [1.0, 1, 1]])
    assert nearest_visible(_map(pts), [1.0, 1.0, 1.2]).index == 1


def test_nearest_empty_map():
    with pytest.raises(StateError):
        nearest_visible(_map(np.zeros((0, 3))), [0, 0, 0])


def test_nearest_matches_linear_scan():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-5, 5, (500, 3))
    nav = _map(pts)
    for q in rng.uniform(-6, 6, (500, 3)):
        assert nearest_visible(nav, q).index == nearest_linear(pts, q)


def test_project_flat_ground():
    nav = _map(_ground())
    pose = project_state(nav, Se2State(1.0, 2.0, math.radians(30)), 0.0)
    np.testing.assert_allclose(pose.translation, [1.0, 2.0, 0.0])
    r = pose.matrix
    np.testing.assert_allclose(r[:, 2], [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(r[:, 0], [math.cos(math.radians(30)), math.sin(math.radians(30)), 0], atol=1e-12)


def test_project_on_incline_keeps_slope():
    a = math.radians(10)
    n = np.array([-math.sin(a), 0.0, math.cos(a)])
    pts = _ground()
    pts[:, 2] = pts[:, 0] * math.tan(a)
    nav = _map(pts, np.tile(n, (len(pts), 1)))
    r = project_state(nav, Se2State(0.0, 0.0, 0.0), 0.0).matrix
    assert r[2, 0] == pytest.approx(math.sin(a), abs=1e-6)
    # independent construction: Gram-Schmidt of the heading against n
    h = np.array([1.0, 0.0, 0.0])
    x = h - (h @ n) * n
    np.testing.assert_allclose(r[:, 0], x / np.linalg.norm(x), atol=1e-12)


def test_project_vertical_surface_degenerate():
    nav = _map([[0.0, 0.0, 0.0]], np.array([[1.0, 0.0, 0.0]]))
    with pytest.raises(DegeneracyError):
        project_state(nav, Se2State(0.0, 0.0, 0.0), 0.0)


def test_project_orthonormal_random():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-5, 5, (300, 3))
    nrm = rng.normal(size=(300, 3))
    nrm[:, 2] = np.abs(nrm[:, 2]) + 0.2
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    nav = _map(pts, nrm)
    for _ in range(1000):
        s = Se2State(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        z_ref = rng.uniform(-2, 2)
        pose = project_state(nav, s, z_ref)
        r = pose.matrix
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_array_equal(pose.translation, pts[nearest_linear(pts, (s.x, s.y, z_ref))])


def test_surface_frame_columns():
    r = surface_frame([0.0, 0.0, 1.0], math.pi / 2)
    np.testing.assert_allclose(r, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)


def test_traversable_ground_never_collides():
    nav = _map(_ground(0.1, 1.0))
    assert not collision_check(nav, Pose3(), RobotBox(1.0, 1.0, 1.0, -0.5)).in_collision


def test_obstacle_at_centre():
    pts = np.vstack([_ground(), [[0.0, 0.0, 0.5]]])
    trav = np.r_[np.ones(len(pts) - 1, bool), False]
    rep = collision_check(_map(pts, trav=trav), Pose3(), RobotBox(1.0, 1.0, 1.0))
    assert rep.in_collision and rep.offending_indices.tolist() == [len(pts) - 1]


def test_point_just_outside_face():
    box = RobotBox(1.0, 0.6, 1.0)
    nav = _map([[0.501, 0.0, 0.5], [0.0, 0.301, 0.5], [0.0, 0.0, 1.001], [0.0, 0.0, -0.001]], trav=np.zeros(4, bool))
    assert not collision_check(nav, Pose3(), box).in_collision


def _random_nav(rng, n=400):
    pts = rng.uniform(-3, 3, (n, 3))
    return _map(pts, trav=rng.uniform(size=n) < 0.5)


def _oracle(nav, pose, box):
    inside = box_members(nav.points, pose.matrix, pose.translation, box.length, box.width, box.height, box.z_offset)
    return [i for i in inside if not nav.traversable[i]]


def test_collision_matches_linear_scan():
    rng = np.random.default_rng(2)
    for _ in range(10):
        nav = _random_nav(rng)
        for _ in range(50):
            pose = Pose3.from_matrix(random_rotation(rng), rng.uniform(-3, 3, 3))
            box = RobotBox(*rng.uniform(0.2, 2.5, 3), rng.uniform(-1, 0.5))
            rep = collision_check(nav, pose, box)
            assert rep.offending_indices.tolist() == _oracle(nav, pose, box)
            assert rep.in_collision == bool(len(rep.offending_indices))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_bigger_box_monotone(seed, dl, dw, dh):
    rng = np.random.default_rng(seed)
    nav = _random_nav(rng, 200)
    pose = Pose3.from_matrix(random_rotation(rng), rng.uniform(-2, 2, 3))
    small = RobotBox(1.0, 0.8, 0.6, -0.2)
    big = RobotBox(1.0 + dl, 0.8 + dw, 0.6 + dh + 0.2, -0.4)
    a = set(collision_check(nav, pose, small).offending_indices.tolist())
    b = set(collision_check(nav, pose, big).offending_indices.tolist())
    assert a <= b
