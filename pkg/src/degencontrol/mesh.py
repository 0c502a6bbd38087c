"""Graded triangular meshes around the degeneracy point and their region tags.

The origin is always a mesh vertex.  Rectangles are meshed by a tensor grid
whose 1-D node sets are power-law graded toward zero; disks by concentric
graded rings around the origin plus a boundary polygon, triangulated with
:class:`scipy.spatial.Delaunay`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

from .errors import CaseViolation, MeshError, NestingViolation
from .geometry import Ball, Box, Shape
from .quadrature import BARY7, WEIGHTS7

OMEGA_BIT, OMEGA0_BIT, EPS_BIT = 1, 2, 4


@dataclass(eq=False)
class Mesh:
    """P1 triangulation of a planar domain.

    ``triangles`` are stored counter-clockwise; ``boundary_edges`` are
    oriented so that the domain lies to their left, and ``normals`` holds the
    outward unit normal of each edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    normals: np.ndarray
    boundary: np.ndarray
    domain: Shape | None = None

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "normals", "boundary"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @cached_property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Constant gradients of the three P1 basis functions, shape (m, 3, 2)."""
        p = self.vertices[self.triangles]
        a2 = 2 * self.signed_areas[:, None]
        g = np.empty((self.n_elements, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / a2[:, 0]
            g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / a2[:, 0]
        return g

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return np.max(np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1)
                                for i in range(3)]), axis=0)

    def quadrature_points(self, bary=BARY7):
        """Physical quadrature points, shape (m, q, 2)."""
        return np.einsum("qi,mid->mqd", bary, self.vertices[self.triangles])

    def quadrature_weights(self, weights=WEIGHTS7):
        """Physical quadrature weights, shape (m, q)."""
        return self.areas[:, None] * weights[None, :]

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(points) -> values``, zeroed on the boundary."""
        v = np.asarray(func(self.vertices), dtype=float).copy()
        v[self.boundary] = 0.0
        return v

    def evaluate_at_quadrature(self, v, bary=BARY7) -> np.ndarray:
        return np.einsum("qi,mi->mq", bary, np.asarray(v)[self.triangles])

    def element_gradients(self, v) -> np.ndarray:
        """Per-element gradient of a P1 field, shape (m, 2)."""
        return np.einsum("mid,mi->md", self.shape_gradients, np.asarray(v)[self.triangles])

    @cached_property
    def origin_distance_to_boundary(self) -> float:
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        return float(np.min(_segment_distance(np.zeros(2), a, b)))

    @cached_property
    def origin_index(self) -> int:
        d = np.linalg.norm(self.vertices, axis=1)
        i = int(np.argmin(d))
        if d[i] > 1e-14:
            raise MeshError("origin is not a mesh vertex")
        return i

    def total_area(self) -> float:
        return float(np.sum(self.areas))

    def polygon_area(self) -> float:
        """Area enclosed by the oriented boundary edges (shoelace formula)."""
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        return float(0.5 * np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))

    def element_origin_distance(self) -> np.ndarray:
        """Distance from the origin to each closed triangle."""
        p = self.vertices[self.triangles]
        o = np.zeros(2)
        d = np.minimum.reduce([_segment_distance(o, p[:, i], p[:, (i + 1) % 3])
                               for i in range(3)])
        inside = np.ones(self.n_elements, dtype=bool)
        for i in range(3):
            a, b = p[:, i], p[:, (i + 1) % 3]
            cross = (b[:, 0] - a[:, 0]) * (-a[:, 1]) - (b[:, 1] - a[:, 1]) * (-a[:, 0])
            inside &= cross >= 0
        d[inside] = 0.0
        return d

    def validate(self):
        """Check the structural invariants; raise :class:`MeshError` on failure."""
        if np.any(self.signed_areas <= 0):
            raise MeshError("non-positive triangle area")
        if self.origin_distance_to_boundary <= 0:
            raise MeshError("origin not strictly inside the domain")
        _check_loops(self.boundary_edges)
        return self


def _segment_distance(p, a, b):
    ab = b - a
    t = np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * ab - p, axis=1)


def _check_loops(edges):
    succ = {}
    for i, j in edges:
        if i in succ:
            raise MeshError(f"vertex {i} starts two boundary edges")
        succ[int(i)] = int(j)
    if sorted(succ) != sorted(int(j) for j in edges[:, 1]):
        raise MeshError("boundary edges do not form closed loops")
    seen = set()
    for start in succ:
        v = start
        while v not in seen:
            seen.add(v)
            v = succ[v]
    if len(seen) != len(succ):
        raise MeshError("boundary loop bookkeeping failed")


def boundary_normals(mesh: Mesh) -> np.ndarray:
    """Outward unit normal of each boundary edge."""
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    d = b - a
    n = np.stack([d[:, 1], -d[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1)[:, None]


def mesh_from_arrays(vertices, triangles, domain=None) -> Mesh:
    """Assemble a :class:`Mesh` from raw arrays, orienting and tagging the boundary."""
    vertices = np.asarray(vertices, dtype=float)
    tri = np.asarray(triangles, dtype=np.int64).copy()
    p = vertices[tri]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    sa = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = sa < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    half = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(half, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bedges = half[counts[inv.ravel()] == 1]
    # deterministic ordering: by (start, end) index
    bedges = bedges[np.lexsort((bedges[:, 1], bedges[:, 0]))]
    flags = np.zeros(len(vertices), dtype=bool)
    flags[bedges.ravel()] = True
    m = Mesh(vertices, tri, bedges, np.empty((0, 2)), flags, domain)
    normals = boundary_normals(m)
    return Mesh(vertices, tri, bedges, normals, flags, domain)


def _graded_axis(a, b, target_h, grading):
    """Sorted 1-D nodes on [a, b] (a < 0 < b) graded toward 0, including 0."""
    parts = [np.zeros(1)]
    for length, sign in ((-a, -1.0), (b, 1.0)):
        n = max(1, int(np.ceil(length * grading / target_h - 1e-12)))
        s = length * (np.arange(1, n + 1) / n) ** grading
        s[-1] = length
        parts.append(sign * s)
    return np.unique(np.concatenate(parts))


def _box_mesh(box: Box, target_h, grading):
    xs = _graded_axis(box.x0, box.x1, target_h, grading)
    ys = _graded_axis(box.y0, box.y1, target_h, grading)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    nx = len(xs)
    tris = []
    for j in range(len(ys) - 1):
        for i in range(nx - 1):
            v00 = j * nx + i
            v10, v01, v11 = v00 + 1, v00 + nx, v00 + nx + 1
            # diagonals point away from the origin in every quadrant
            if (xs[i] + xs[i + 1]) * (ys[j] + ys[j + 1]) >= 0:
                tris += [(v00, v10, v11), (v00, v11, v01)]
            else:
                tris += [(v00, v10, v01), (v10, v11, v01)]
    return verts, np.array(tris)


def _disk_mesh(disk: Ball, target_h, grading):
    c, R = disk.center, disk.radius
    reach = disk.max_distance((0.0, 0.0))
    n = max(2, int(np.ceil(reach * grading / target_h)))
    radii = reach * (np.arange(1, n + 1) / n) ** grading
    pts = [np.zeros((1, 2))]
    prev = 0.0
    for k, r in enumerate(radii):
        dr = r - prev
        prev = r
        m = max(6, int(np.ceil(2 * np.pi * r / dr)))
        ang = 2 * np.pi * (np.arange(m) + 0.5 * (k % 2)) / m
        ring = r * np.column_stack([np.cos(ang), np.sin(ang)])
        keep = np.linalg.norm(ring - c, axis=1) < R - 0.5 * dr
        pts.append(ring[keep])
    # boundary spacing follows the local ring spacing at the nearest boundary point
    dmin = disk.radius - np.linalg.norm(c)
    hb = target_h * min(1.0, (dmin / reach)) ** (1 - 1 / grading)
    nb = max(12, int(np.ceil(2 * np.pi * R / hb)))
    ang = 2 * np.pi * np.arange(nb) / nb
    pts.append(c + R * np.column_stack([np.cos(ang), np.sin(ang)]))
    verts = np.concatenate(pts)
    tri = Delaunay(verts).simplices
    p = verts[tri]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tri = tri[area > 1e-14 * R**2]
    return verts, tri


def build_graded_mesh(domain: Shape, target_h: float, grading_exponent: float = 1.0) -> Mesh:
    """Triangulate ``domain`` with element size graded toward the origin.

    Element size at distance ``r`` from the origin is about
    ``target_h * (r / L) ** (1 - 1/grading_exponent)`` where ``L`` is the
    largest distance from the origin to the domain.  ``grading_exponent=1``
    gives a quasi-uniform mesh.

    Raises
    ------
    MeshError
        If the domain has zero area or does not contain the origin strictly.
    """
    if target_h <= 0:
        raise MeshError("target_h must be positive")
    if grading_exponent < 1:
        raise MeshError("grading_exponent must be >= 1")
    if not domain.area > 0:
        raise MeshError("degenerate domain (zero area)")
    if not domain.contains(np.zeros((1, 2)))[0]:
        raise MeshError("origin must lie strictly inside the domain")
    if isinstance(domain, Box):
        verts, tri = _box_mesh(domain, target_h, grading_exponent)
    elif isinstance(domain, Ball):
        verts, tri = _disk_mesh(domain, target_h, grading_exponent)
    else:
        raise MeshError(f"unsupported domain {domain!r}")
    mesh = mesh_from_arrays(verts, tri, domain)
    mesh.validate()
    _ = mesh.origin_index
    return mesh


@dataclass(frozen=True, eq=False)
class RegionTags:
    """Element sets for omega and omega0 plus the degeneracy radii."""

    omega_elems: np.ndarray
    omega0_elems: np.ndarray
    eps: float
    eps0: float
    case: str
    omega: Shape
    omega0: Shape
    eps_elems: np.ndarray = field(default=None)

    def masks(self, mesh: Mesh) -> np.ndarray:
        bits = np.zeros(mesh.n_elements, dtype=np.int64)
        bits[self.omega_elems] |= OMEGA_BIT
        bits[self.omega0_elems] |= OMEGA0_BIT
        if self.eps_elems is not None:
            bits[self.eps_elems] |= EPS_BIT
        return bits

    def omega0_nodes(self, mesh: Mesh) -> np.ndarray:
        """Boolean mask of nodes belonging to at least one omega0 element."""
        mask = np.zeros(mesh.n_nodes, dtype=bool)
        mask[mesh.triangles[self.omega0_elems].ravel()] = True
        return mask


def tag_regions(mesh: Mesh, omega_spec: Shape, omega0_spec: Shape, eps: float,
                case: str, eps0: float | None = None) -> RegionTags:
    """Tag omega / omega0 elements by barycenter and validate the case geometry.

    ``eps0`` defaults to 0.99 times the distance from the origin to the
    boundary.

    Raises
    ------
    CaseViolation
        Interior case: some triangle meeting the ball of radius ``6 eps`` is
        not an omega0 triangle.  Offcenter case: some omega triangle meets the
        ball of radius ``2 eps``.
    NestingViolation
        The closure of omega is not inside omega0.
    """
    if case not in ("interior", "offcenter"):
        raise ValueError(f"unknown case {case!r}")
    dist = mesh.origin_distance_to_boundary
    if eps0 is None:
        eps0 = 0.99 * dist
    if not 0 < eps0 < dist:
        raise CaseViolation(f"eps0={eps0} must lie in (0, d(0, boundary)={dist:.6g})")
    if not 0 < eps < eps0 / 9:
        raise CaseViolation(f"eps={eps} must lie in (0, eps0/9={eps0 / 9:.6g})")

    bc = mesh.barycenters
    omega_elems = np.flatnonzero(omega_spec.contains(bc))
    omega0_elems = np.flatnonzero(omega0_spec.contains(bc))
    if len(omega_elems) == 0:
        raise NestingViolation("omega contains no element barycenter")
    if not omega_spec.inside(omega0_spec) or not np.all(np.isin(omega_elems, omega0_elems)):
        raise NestingViolation("closure of omega is not contained in omega0")

    dist_el = mesh.element_origin_distance()
    if case == "interior":
        near = np.flatnonzero(dist_el < 6 * eps)
        missing = np.setdiff1d(near, omega0_elems)
        if len(missing):
            raise CaseViolation(
                f"{len(missing)} triangles meeting the ball of radius 6*eps={6 * eps:g} "
                "lie outside omega0")
    else:
        bad = omega_elems[dist_el[omega_elems] < 2 * eps]
        if len(bad) or omega_spec.min_distance((0.0, 0.0)) <= 2 * eps:
            raise CaseViolation(f"omega meets the ball of radius 2*eps={2 * eps:g}")
    eps_elems = np.flatnonzero(np.linalg.norm(bc, axis=1) < eps)
    return RegionTags(omega_elems, omega0_elems, float(eps), float(eps0), case,
                      omega_spec, omega0_spec, eps_elems)


def retag_eps(tags: RegionTags, mesh: Mesh, eps: float) -> RegionTags:
    """Same regions with a different degeneracy radius, re-validated."""
    return tag_regions(mesh, tags.omega, tags.omega0, eps, tags.case, tags.eps0)
