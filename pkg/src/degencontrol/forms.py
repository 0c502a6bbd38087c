"""Mass and degenerate stiffness forms for P1 elements, weighted norms, Hardy check."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, QuadratureError
from .mesh import Mesh
from .quadrature import BARY7, WEIGHTS7, subdivided_rule

DIM = 2


def _rotating_field(pts):
    p = np.asarray(pts)
    ang = 0.5 * np.pi * p[..., 0]
    c, s = np.cos(ang), np.sin(ang)
    d1, d2 = 2.0, 1.0
    out = np.empty(p.shape[:-1] + (2, 2))
    out[..., 0, 0] = d1 * c * c + d2 * s * s
    out[..., 1, 1] = d1 * s * s + d2 * c * c
    out[..., 0, 1] = out[..., 1, 0] = (d1 - d2) * c * s
    return out


NAMED_FIELDS = {
    "identity": (np.eye(2), 1.0),
    "anisotropic": (np.array([[2.0, 0.5], [0.5, 1.0]]), 1.5 - np.sqrt(0.5)),
    # eigenvalues 2 and 1 along a direction rotating with x1
    "rotating": (_rotating_field, 1.0),
}


@dataclass(frozen=True)
class CoefficientField:
    """Degeneracy exponent and symmetric uniformly elliptic matrix field.

    ``A`` is either a constant 2x2 array or a callable mapping points of
    shape (..., 2) to matrices of shape (..., 2, 2).  ``sanity=True`` admits
    ``alpha = 0`` for analytic tests.
    """

    alpha: float
    A: np.ndarray | Callable = None
    beta: float | None = None
    sanity: bool = False

    def __post_init__(self):
        A = np.eye(2) if self.A is None else self.A
        if not callable(A):
            A = np.asarray(A, dtype=float)
            if A.shape != (2, 2):
                raise ValueError("constant A must be 2x2")
            if not np.allclose(A, A.T, rtol=0, atol=1e-14):
                raise ValueError("A must be symmetric")
        object.__setattr__(self, "A", A)
        if self.sanity:
            if not 0 <= self.alpha < 2:
                raise ValueError("sanity mode requires alpha in [0, 2)")
        elif not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.beta is None:
            if callable(A):
                raise ValueError("beta is required for a variable A")
            object.__setattr__(self, "beta", float(np.linalg.eigvalsh(A)[0]))
        if not self.beta > 0:
            raise ValueError("ellipticity bound beta must be positive")

    @classmethod
    def named(cls, name, alpha, sanity=False):
        A, beta = NAMED_FIELDS[name]
        return cls(alpha, A, beta, sanity)

    def matrix(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if callable(self.A):
            return np.asarray(self.A(pts), dtype=float)
        return np.broadcast_to(self.A, pts.shape[:-1] + (2, 2))

    def weight(self, pts) -> np.ndarray:
        """Degenerate factor ``|x|**alpha``."""
        return np.linalg.norm(pts, axis=-1) ** self.alpha

    def check_ellipticity(self, pts, directions=None) -> float:
        """Minimum of ``xi^T A(x) xi / |xi|^2`` over points (and directions).

        Raises ``ValueError`` if A is not symmetric at a point or the bound
        ``beta`` is violated.
        """
        A = self.matrix(np.asarray(pts, dtype=float).reshape(-1, 2))
        if np.max(np.abs(A - np.swapaxes(A, -1, -2))) > 1e-12:
            raise ValueError("A(x) not symmetric")
        lam = np.linalg.eigvalsh(A)[:, 0]
        if directions is not None:
            xi = np.asarray(directions, dtype=float).reshape(-1, 2)
            q = np.einsum("ni,nij,nj->n", xi, A, xi) / np.einsum("ni,ni->n", xi, xi)
            lam = np.minimum(lam, q)
        low = float(lam.min())
        if low < self.beta * (1 - 1e-12):
            raise ValueError(f"ellipticity bound violated: {low} < beta={self.beta}")
        return low


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    """Sparse symmetric matrix on all nodes plus the free-node restriction."""

    full: sp.csr_matrix
    free: np.ndarray

    @property
    def reduced(self) -> sp.csr_matrix:
        return self.full[self.free][:, self.free].tocsr()

    def symmetry_defect(self) -> float:
        d = abs(self.full - self.full.T)
        scale = abs(self.full).max()
        return float(d.max() / scale) if d.nnz else 0.0

    def quadratic(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if len(v) == len(self.free) != self.full.shape[0]:
            return float(v @ (self.reduced @ v))
        return float(v @ (self.full @ v))

    def to_coo_lines(self, reduced=True):
        mat = (self.reduced if reduced else self.full).tocoo()
        order = np.lexsort((mat.col, mat.row))
        return [f"{mat.row[k]} {mat.col[k]} {mat.data[k]:.17g}" for k in order]


def _scatter(mesh: Mesh, local, elems=None):
    tri = mesh.triangles if elems is None else mesh.triangles[elems]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    mat.sum_duplicates()
    # exact symmetry as stored
    return ((mat + mat.T) * 0.5).tocsr()


def element_mass(areas):
    """P1 element mass matrices ``area/12 * [[2,1,1],[1,2,1],[1,1,2]]``."""
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return areas[:, None, None] * base[None]


def assemble_mass(mesh: Mesh, elems=None) -> DiscreteForm:
    """Consistent P1 mass matrix, optionally restricted to a subset of elements."""
    areas = mesh.areas if elems is None else mesh.areas[elems]
    return DiscreteForm(_scatter(mesh, element_mass(areas), elems), mesh.free)


def lumped_mass(mesh: Mesh, elems=None) -> np.ndarray:
    """Row-sum lumped mass (one third of each adjacent element area per node)."""
    tri = mesh.triangles if elems is None else mesh.triangles[elems]
    areas = mesh.areas if elems is None else mesh.areas[elems]
    return np.bincount(tri.ravel(), np.repeat(areas / 3.0, 3), minlength=mesh.n_nodes)


def averaged_coefficient(mesh: Mesh, coeff: CoefficientField, bary=BARY7, weights=WEIGHTS7):
    """Per-element integral of ``|x|^alpha A(x)``, shape (m, 2, 2)."""
    pts = mesh.quadrature_points(bary)
    w = mesh.quadrature_weights(weights) * coeff.weight(pts)
    return np.einsum("mq,mqij->mij", w, coeff.matrix(pts))


def quadrature_defect(mesh: Mesh, coeff: CoefficientField, levels=2) -> float:
    """Largest relative change of the element coefficient integrals when the
    7-point rule is replaced by its ``4**levels``-fold composite."""
    coarse = averaged_coefficient(mesh, coeff)
    fine = averaged_coefficient(mesh, coeff, *subdivided_rule(levels))
    num = np.linalg.norm(coarse - fine, axis=(1, 2))
    den = np.linalg.norm(fine, axis=(1, 2))
    return float(np.max(num / np.maximum(den, 1e-300)))


def assemble_degenerate_stiffness(mesh: Mesh, coeff: CoefficientField,
                                  check_quadrature=False, rtol=5e-2) -> DiscreteForm:
    """Stiffness ``K_ij = int |x|^alpha A grad(phi_j) . grad(phi_i) dx``.

    P1 gradients are constant per element, so the 7-point rule only acts on
    ``|x|^alpha A(x)``.  With ``check_quadrature`` the rule is compared to a
    composite refinement and :class:`QuadratureError` is raised when the
    relative element defect exceeds ``rtol``.
    """
    Abar = averaged_coefficient(mesh, coeff)
    if check_quadrature:
        defect = quadrature_defect(mesh, coeff)
        if defect > rtol:
            raise QuadratureError(f"quadrature defect {defect:.3g} exceeds {rtol:g}")
    G = mesh.shape_gradients
    local = np.einsum("mid,mde,mje->mij", G, Abar, G)
    return DiscreteForm(_scatter(mesh, local), mesh.free)


def weighted_h1_norm(field, stiffness: DiscreteForm) -> float:
    """Degenerate energy norm ``sqrt(v^T K v)``."""
    q = stiffness.quadratic(field)
    if q < 0:
        v = np.asarray(field, dtype=float)
        tol = 1e-12 * abs(stiffness.full).max() * float(v @ v)
        if q < -tol:
            raise AssemblyError(f"negative energy {q:.3g}: broken stiffness assembly")
        q = 0.0
    return float(np.sqrt(q))


@dataclass(frozen=True)
class HardyResult:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def hardy_integral(mesh: Mesh, field, alpha, bary=BARY7, weights=WEIGHTS7) -> float:
    """``int |x|^(alpha-2) z^2 dx`` by a rule whose nodes avoid the vertices."""
    pts = mesh.quadrature_points(bary)
    zq = mesh.evaluate_at_quadrature(field, bary)
    w = mesh.quadrature_weights(weights)
    r = np.linalg.norm(pts, axis=-1)
    return float(np.sum(w * r ** (alpha - 2) * zq**2))


def energy_from_field(mesh: Mesh, coeff: CoefficientField, field) -> float:
    gv = mesh.element_gradients(field)
    Abar = averaged_coefficient(mesh, coeff)
    return float(np.einsum("md,mde,me->", gv, Abar, gv))


def hardy_check(field, coeff: CoefficientField, mesh: Mesh, check=False, rtol=1e-2) -> HardyResult:
    """Both sides of the weighted Hardy inequality for a P1 field vanishing on
    the boundary: ``lhs = (N - 2 + alpha) * || |x|^(alpha/2 - 1) z ||`` and
    ``rhs = ||z||`` in the degenerate energy norm.

    With ``check`` the left integral is recomputed with a composite rule; a
    relative change above ``rtol`` raises :class:`QuadratureError` (the field
    does not vanish fast enough at the origin for the rule to resolve it).
    """
    if not 0 < coeff.alpha < 2:
        raise ValueError("hardy_check needs alpha in (0, 2)")
    z = np.asarray(field, dtype=float)
    integral = hardy_integral(mesh, z, coeff.alpha)
    if check and integral > 0:
        fine = hardy_integral(mesh, z, coeff.alpha, *subdivided_rule(2))
        if abs(fine - integral) > rtol * fine:
            raise QuadratureError(
                f"Hardy integrand unresolved: {integral:.6g} vs refined {fine:.6g}")
    lhs = (DIM - 2 + coeff.alpha) * np.sqrt(integral)
    rhs = np.sqrt(max(energy_from_field(mesh, coeff, z), 0.0))
    return HardyResult(float(lhs), float(rhs))
