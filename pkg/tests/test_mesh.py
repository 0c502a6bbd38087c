import numpy as np
import pytest
from hypothesis import given, strategies as st

from degencontrol import Ball, Box, build_graded_mesh, tag_regions
from degencontrol.errors import CaseViolation, MeshError, NestingViolation
from degencontrol.geometry import format_shape, parse_shape
from degencontrol.mesh import EPS_BIT, OMEGA0_BIT, OMEGA_BIT, boundary_normals, mesh_from_arrays

from conftest import SQUARE


def test_uniform_square_vertex_count():
    mesh = build_graded_mesh(SQUARE, 0.5, 1.0)
    assert mesh.n_nodes == 25
    assert mesh.n_elements == 32


@given(h=st.floats(0.08, 0.6), gamma=st.floats(1.0, 3.0),
       x0=st.floats(-2.0, -0.3), x1=st.floats(0.3, 2.0),
       y0=st.floats(-2.0, -0.3), y1=st.floats(0.3, 2.0))
def test_box_area_partition(h, gamma, x0, x1, y0, y1):
    box = Box(x0, x1, y0, y1)
    mesh = build_graded_mesh(box, h, gamma)
    assert mesh.total_area() == pytest.approx(box.area, rel=1e-12)
    assert np.all(mesh.signed_areas > 0)


@given(h=st.floats(0.08, 0.4), gamma=st.floats(1.0, 2.5),
       cx=st.floats(-0.3, 0.3), cy=st.floats(-0.3, 0.3), r=st.floats(0.6, 1.5))
def test_disk_area_matches_polygon(h, gamma, cx, cy, r):
    mesh = build_graded_mesh(Ball(cx, cy, r), h, gamma)
    assert mesh.total_area() == pytest.approx(mesh.polygon_area(), rel=1e-12)
    assert np.all(mesh.signed_areas > 0)
    on_bnd = mesh.vertices[mesh.boundary]
    assert np.allclose(np.linalg.norm(on_bnd - [cx, cy], axis=1), r, atol=1e-12)


def test_graded_diameter_bound():
    mesh = build_graded_mesh(SQUARE, 0.1, 2.0)
    near = np.linalg.norm(mesh.barycenters, axis=1) < 0.1
    assert mesh.diameters[near].min() <= 0.1 * 0.05


def test_origin_is_vertex():
    for dom in (SQUARE, Ball(0.1, -0.2, 1.0)):
        mesh = build_graded_mesh(dom, 0.2, 1.5)
        assert np.linalg.norm(mesh.vertices[mesh.origin_index]) == 0.0


def test_boundary_vertices_on_box_boundary(square_mesh):
    v = square_mesh.vertices[square_mesh.boundary]
    assert np.all(np.isclose(np.abs(v).max(axis=1), 1.0, atol=1e-12))
    interior = square_mesh.vertices[~square_mesh.boundary]
    assert np.all(np.abs(interior).max(axis=1) < 1.0)


def test_normals(square_mesh):
    n = boundary_normals(square_mesh)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-14)
    mid = square_mesh.vertices[square_mesh.boundary_edges].mean(axis=1)
    right = np.isclose(mid[:, 0], 1.0)
    top = np.isclose(mid[:, 1], 1.0)
    assert np.allclose(n[right], [1.0, 0.0])
    assert np.allclose(n[top], [0.0, 1.0])
    # outward: the normal points away from the domain center
    assert np.all(np.einsum("ij,ij->i", n, mid) > 0)


def test_boundary_loop_closed(square_mesh):
    e = square_mesh.boundary_edges
    assert np.array_equal(np.sort(e[:, 0]), np.sort(e[:, 1]))


def test_invalid_domains():
    with pytest.raises(MeshError):
        build_graded_mesh(Box(0.1, 1.0, -1.0, 1.0), 0.2)
    with pytest.raises(MeshError):
        build_graded_mesh(Ball(2.0, 0.0, 1.0), 0.2)
    with pytest.raises((MeshError, ValueError)):
        build_graded_mesh(Box(-1.0, 1.0, 0.0, 0.0), 0.2)
    with pytest.raises(ValueError):
        build_graded_mesh(SQUARE, -0.1)
    with pytest.raises(ValueError):
        build_graded_mesh(SQUARE, 0.1, 0.5)


def test_tag_interior_accepted(square_mesh):
    tags = tag_regions(square_mesh, Ball(0.2, 0.0, 0.1), Ball(0.0, 0.0, 0.5), 0.05, "interior")
    assert np.all(np.isin(tags.omega_elems, tags.omega0_elems))
    assert 0 < tags.eps < tags.eps0 / 9


def test_tag_offcenter_accepted(square_mesh):
    tags = tag_regions(square_mesh, Ball(0.6, 0.0, 0.1), Ball(0.6, 0.0, 0.2), 0.05, "offcenter")
    assert tags.case == "offcenter"


def test_tag_interior_too_small_omega0(square_mesh):
    with pytest.raises(CaseViolation):
        tag_regions(square_mesh, Ball(0.0, 0.0, 0.1), Ball(0.0, 0.0, 0.2), 0.05, "interior")


def test_tag_offcenter_omega_near_origin(square_mesh):
    with pytest.raises(CaseViolation):
        tag_regions(square_mesh, Ball(0.2, 0.0, 0.12), Ball(0.3, 0.0, 0.3), 0.05, "offcenter")


def test_tag_nesting(square_mesh):
    with pytest.raises(NestingViolation):
        tag_regions(square_mesh, Ball(0.0, 0.0, 0.5), Ball(0.0, 0.0, 0.5), 0.05, "interior")


def test_tag_eps_range(square_mesh):
    with pytest.raises(CaseViolation):
        tag_regions(square_mesh, Ball(0.2, 0.0, 0.1), Ball(0.0, 0.0, 0.9), 0.12, "interior")


def test_region_monotone_under_refinement():
    for h in (0.1, 0.05, 0.025):
        mesh = build_graded_mesh(SQUARE, h)
        tag_regions(mesh, Ball(0.2, 0.0, 0.15), Ball(0.0, 0.0, 0.5), 0.05, "interior")
        with pytest.raises(CaseViolation):
            tag_regions(mesh, Ball(0.0, 0.0, 0.1), Ball(0.0, 0.0, 0.2), 0.05, "interior")


def test_masks(square_mesh, interior_tags):
    bits = interior_tags.masks(square_mesh)
    assert np.all(bits[interior_tags.omega_elems] & OMEGA_BIT)
    assert np.all(bits[interior_tags.omega0_elems] & OMEGA0_BIT)
    assert np.all(bits[interior_tags.eps_elems] & EPS_BIT)


def test_mesh_from_arrays_orients():
    v = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1], [0, 0]], dtype=float)
    t = np.array([[0, 4, 1], [1, 2, 4], [2, 4, 3], [3, 0, 4]])
    mesh = mesh_from_arrays(v, t)
    assert np.all(mesh.signed_areas > 0)
    assert mesh.total_area() == pytest.approx(4.0)
    assert mesh.boundary.tolist() == [True, True, True, True, False]


def test_shape_roundtrip():
    for s in (Ball(0.5, -0.25, 0.3), Box(-1, 2, -0.5, 0.5)):
        assert parse_shape(format_shape(s)) == s
    with pytest.raises(ValueError):
        parse_shape("triangle 0 0 1")
