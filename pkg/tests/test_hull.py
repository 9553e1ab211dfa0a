import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovpc_mesh.errors import DegeneracyError, SizeError, StructuralError
from ovpc_mesh.geometry import mesh_topology_check
from ovpc_mesh.hull import HullConfig, HullMesh, face_planes, hull_contains, quickhull3

from oracles import hull_boundary_points, hull_facet_planes, random_rotation

CUBE = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
TET = np.array([[1.0, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])


def _ball(rng, n, r=1.0):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (r * np.cbrt(rng.uniform(size=n)))[:, None]


def _sound(hull: HullMesh, pts: np.ndarray) -> bool:
    normals, off = face_planes(hull.vertices, hull.faces)
    return bool((normals @ pts.T - off[:, None] <= hull.epsilon * 10).all())


def test_tetrahedron():
    h = quickhull3(TET)
    assert h.n_faces == 4 and h.vertex_on_hull.all()
    assert mesh_topology_check(h).euler_characteristic == 2


def test_cube_with_centre():
    pts = np.vstack([CUBE, [[0.5, 0.5, 0.5]]])
    h = quickhull3(pts)
    assert h.n_faces == 12
    assert h.vertex_on_hull.tolist() == [True] * 8 + [False]
    ours = {tuple(r) for r in np.round(np.column_stack(face_planes(h.vertices, h.faces)), 6) + 0.0}
    assert ours == hull_facet_planes(pts)


def test_hull_vertices_are_input_points():
    rng = np.random.default_rng(3)
    pts = _ball(rng, 200)
    h = quickhull3(pts)
    np.testing.assert_array_equal(h.vertices, pts[h.source_index])


@pytest.mark.parametrize("seed", range(40))
def test_random_ball_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    pts = _ball(rng, int(rng.integers(4, 51)))
    h = quickhull3(pts)
    np.testing.assert_array_equal(h.vertex_on_hull, hull_boundary_points(pts))
    assert _sound(h, pts)
    rep = mesh_topology_check(h)
    assert rep.is_closed and rep.euler_characteristic == 2


def test_normals_point_outward():
    rng = np.random.default_rng(4)
    pts = _ball(rng, 300) + 5.0
    h = quickhull3(pts)
    centroid = pts.mean(axis=0)
    to_face = h.face_centroids() - centroid
    assert (np.einsum("ij,ij->i", h.face_normals, to_face) > 0).all()


def test_coplanar_points_on_face_are_on_hull():
    # face centres of a cube lie on the boundary but are not needed as vertices
    centres = np.array([[0.5, 0.5, 0], [0.5, 0.5, 1], [0.5, 0, 0.5], [0.5, 1, 0.5], [0, 0.5, 0.5], [1, 0.5, 0.5]])
    pts = np.vstack([CUBE, centres, [[0.5, 0.5, 0.5]]])
    h = quickhull3(pts)
    assert h.vertex_on_hull[:14].all() and not h.vertex_on_hull[14]
    assert mesh_topology_check(h).is_closed


def test_deterministic():
    pts = _ball(np.random.default_rng(5), 500)
    a, b = quickhull3(pts), quickhull3(pts.copy())
    np.testing.assert_array_equal(a.faces, b.faces)
    np.testing.assert_array_equal(a.source_index, b.source_index)


def test_too_few_points():
    with pytest.raises(SizeError):
        quickhull3(TET[:3])


@pytest.mark.parametrize(
    "pts, dim",
    [
        (np.ones((6, 3)), 0),
        (np.outer(np.arange(6.0), [1.0, 2.0, 3.0]), 1),
        (np.column_stack([np.random.default_rng(0).normal(size=(10, 2)), np.zeros(10)]), 2),
    ],
)
def test_degenerate_inputs(pts, dim):
    with pytest.raises(DegeneracyError) as exc:
        quickhull3(pts)
    assert exc.value.dimension == dim


def test_tolerance_scales_with_magnitude():
    pts = np.array([[1e6, 0, 0], [0, 1e6, 0], [0, 0, 1e6], [0, 0, 0]], dtype=float)
    assert HullConfig().tolerance(pts) == pytest.approx(1e-4)


def test_contains_tetrahedron_cases():
    h = quickhull3(TET)
    centroid = TET.mean(axis=0)
    assert hull_contains(h, centroid, 1e-9)
    assert hull_contains(h, TET[0], 1e-9)
    circumradius = np.linalg.norm(TET[0] - centroid)
    assert not hull_contains(h, centroid + np.array([2 * circumradius, 0, 0]), 1e-9)


def test_contains_requires_closed_hull():
    h = quickhull3(TET)
    open_mesh = HullMesh(h.vertices, h.faces[:3], h.face_normals[:3], h.source_index, vertex_on_hull=h.vertex_on_hull)
    with pytest.raises(StructuralError):
        hull_contains(open_mesh, TET.mean(axis=0), 1e-9)


def test_completeness_witness():
    rng = np.random.default_rng(6)
    pts = _ball(rng, 400)
    h = quickhull3(pts)
    for q in pts[~h.vertex_on_hull]:
        assert hull_contains(h, q, h.epsilon)


@pytest.mark.parametrize("seed", range(20))
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(100 + seed)
    pts = _ball(rng, 150)
    r = random_rotation(rng)
    np.testing.assert_array_equal(quickhull3(pts).vertex_on_hull, quickhull3(pts @ r.T).vertex_on_hull)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_property_closed_and_sound(n, seed, scale):
    pts = _ball(np.random.default_rng(seed), n, scale)
    h = quickhull3(pts)
    assert _sound(h, pts)
    rep = mesh_topology_check(h)
    assert rep.is_closed and rep.euler_characteristic == 2


def test_large_scale_agrees_with_points_on_sphere():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(5000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    h = quickhull3(v)
    assert h.vertex_on_hull.all()
    assert h.n_faces == 2 * 5000 - 4
