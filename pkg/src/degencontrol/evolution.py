"""Implicit time stepping of the degenerate heat equation and its adjoint.

Conventions
-----------
Trajectories are :class:`SpaceTimeField` objects with ``steps + 1`` slices at
``t_n = n * dt``.  Controls and adjoint sources are interval fields with
``steps`` slices: ``g[n]`` acts on the step ``t_n -> t_{n+1}`` and ``f[n]``
enters the backward step producing ``w^n`` from ``w^{n+1}``.  With this
indexing the backward recursion is the exact transpose of the forward one and

    <z^N, w^N>_M - <z^0, w^0>_M = dt * sum_n ( <g^n, w^n>_{M,omega0}
                                             + <z^{n+1}, f^n>_M ).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError
from .forms import CoefficientField, assemble_degenerate_stiffness, assemble_mass, lumped_mass
from .mesh import Mesh, RegionTags


@dataclass(eq=False)
class SpaceTimeField:
    """Nodal values per time slice, shape ``(slices, n_nodes)``."""

    values: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, n):
        return self.values[n]

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps)

    def reversed(self) -> "SpaceTimeField":
        return SpaceTimeField(self.values[::-1].copy(), self.dt)

    def scaled(self, c) -> "SpaceTimeField":
        return SpaceTimeField(c * self.values, self.dt)


class Discretization:
    """Mesh, regions, coefficients and time grid with cached operators.

    The system matrix of the chosen scheme is factorized once (sparse LU) and
    reused by every forward and adjoint solve.
    """

    def __init__(self, mesh: Mesh, tags: RegionTags | None, coeff: CoefficientField,
                 T: float, dt: float, scheme: str = "euler"):
        if not T > 0 or not dt > 0:
            raise ValueError("T and dt must be positive")
        steps = round(T / dt)
        if steps < 1 or abs(steps * dt - T) > 1e-12 * max(T, 1.0):
            raise ValueError(f"dt={dt} does not divide T={T}")
        if scheme not in ("euler", "crank-nicolson"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.mesh, self.tags, self.coeff = mesh, tags, coeff
        self.T, self.dt, self.scheme = float(T), float(dt), scheme
        self.steps = int(steps)
        self.free = mesh.free

    @cached_property
    def mass_form(self):
        return assemble_mass(self.mesh)

    @cached_property
    def stiffness_form(self):
        return assemble_degenerate_stiffness(self.mesh, self.coeff)

    @cached_property
    def M(self) -> sp.csr_matrix:
        return self.mass_form.reduced

    @cached_property
    def K(self) -> sp.csr_matrix:
        return self.stiffness_form.reduced

    @cached_property
    def M_omega0(self) -> sp.csr_matrix:
        elems = (np.arange(self.mesh.n_elements) if self.tags is None
                 else self.tags.omega0_elems)
        return assemble_mass(self.mesh, elems).reduced

    @cached_property
    def omega0_nodes(self) -> np.ndarray:
        if self.tags is None:
            return np.ones(self.mesh.n_nodes, dtype=bool)
        return self.tags.omega0_nodes(self.mesh)

    @cached_property
    def lumped(self) -> np.ndarray:
        return lumped_mass(self.mesh)

    @cached_property
    def _theta(self) -> float:
        return 1.0 if self.scheme == "euler" else 0.5

    @cached_property
    def _lhs(self):
        S = (self.M + self._theta * self.dt * self.K).tocsc()
        try:
            return spla.splu(S)
        except RuntimeError as exc:  # singular factor
            raise AssemblyError(f"time-step matrix factorization failed: {exc}") from exc

    @cached_property
    def _explicit(self) -> sp.csr_matrix:
        return (self.M - (1 - self._theta) * self.dt * self.K).tocsr()

    # -- vector helpers -------------------------------------------------
    def restrict(self, v):
        return np.asarray(v, dtype=float)[..., self.free]

    def extend(self, vf):
        vf = np.asarray(vf)
        out = np.zeros(vf.shape[:-1] + (self.mesh.n_nodes,))
        out[..., self.free] = vf
        return out

    def inner_M(self, a, b) -> float:
        return float(self.restrict(a) @ (self.M @ self.restrict(b)))

    def norm_M(self, a) -> float:
        return float(np.sqrt(max(self.inner_M(a, a), 0.0)))

    def inner_omega0(self, a, b) -> float:
        return float(self.restrict(a) @ (self.M_omega0 @ self.restrict(b)))

    def mask_omega0(self, v):
        """Zero a nodal (or space-time) field off the omega0 element nodes."""
        return np.where(self.omega0_nodes, v, 0.0)

    # -- solvers ----------------------------------------------------------
    def zero_interval_field(self) -> np.ndarray:
        return np.zeros((self.steps, self.mesh.n_nodes))

    def forward(self, z0, g=None) -> SpaceTimeField:
        """Implicit Euler (or Crank-Nicolson) for the controlled problem."""
        z = np.empty((self.steps + 1, len(self.free)))
        z[0] = self.restrict(z0)
        gf = None if g is None else self.restrict(_values(g))
        lu, E = self._lhs, self._explicit
        for n in range(self.steps):
            rhs = E @ z[n]
            if gf is not None:
                rhs += self.dt * (self.M_omega0 @ gf[n])
            z[n + 1] = lu.solve(rhs)
        _check_finite(z)
        return SpaceTimeField(self.extend(z), self.dt)

    def adjoint(self, wT, f=None) -> SpaceTimeField:
        """Backward recursion ``(M + dt K) w^n = M w^{n+1} - dt M f^n``."""
        w = np.empty((self.steps + 1, len(self.free)))
        w[-1] = self.restrict(wT)
        ff = None if f is None else self.restrict(_values(f))
        lu, E = self._lhs, self._explicit
        for n in range(self.steps - 1, -1, -1):
            rhs = E @ w[n + 1]
            if ff is not None:
                rhs -= self.dt * (self.M @ ff[n])
            w[n] = lu.solve(rhs)
        _check_finite(w)
        return SpaceTimeField(self.extend(w), self.dt)


def _values(x):
    return x.values if isinstance(x, SpaceTimeField) else np.asarray(x, dtype=float)


def _check_finite(a):
    if not np.all(np.isfinite(a)):
        raise AssemblyError("non-finite values in trajectory")


@dataclass(eq=False)
class ForwardProblem:
    disc: Discretization
    z0: np.ndarray
    g: np.ndarray | None = None

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float)
        if np.any(self.z0[self.disc.mesh.boundary] != 0):
            raise ValueError("z0 must vanish on boundary nodes")
        if self.g is not None:
            self.g = _values(self.g)
            if self.g.shape != (self.disc.steps, self.disc.mesh.n_nodes):
                raise ValueError("g must have one nodal slice per time step")


@dataclass(eq=False)
class AdjointProblem:
    disc: Discretization
    wT: np.ndarray
    f: np.ndarray | None = None

    def __post_init__(self):
        self.wT = np.asarray(self.wT, dtype=float)
        if np.any(self.wT[self.disc.mesh.boundary] != 0):
            raise ValueError("wT must vanish on boundary nodes")
        if self.f is not None:
            self.f = _values(self.f)
            if self.f.shape != (self.disc.steps, self.disc.mesh.n_nodes):
                raise ValueError("f must have one nodal slice per time step")


def solve_forward(p: ForwardProblem) -> SpaceTimeField:
    return p.disc.forward(p.z0, p.g)


def solve_adjoint(p: AdjointProblem) -> SpaceTimeField:
    return p.disc.adjoint(p.wT, p.f)


def duality_terms(fp: ForwardProblem, ap: AdjointProblem, z: SpaceTimeField,
                  w: SpaceTimeField) -> dict:
    """The individual terms of the discrete Green identity."""
    disc = fp.disc
    if ap.disc is not disc:
        raise ValueError("forward and adjoint problems use different discretizations")
    if disc.scheme != "euler":
        raise ValueError("exact discrete duality holds for the implicit Euler scheme only")
    zf, wf = disc.restrict(z.values), disc.restrict(w.values)
    terminal = float(zf[-1] @ (disc.M @ wf[-1]))
    initial = float(zf[0] @ (disc.M @ wf[0]))
    control = 0.0
    if fp.g is not None:
        gf = disc.restrict(fp.g)
        control = disc.dt * float(np.sum(gf * (disc.M_omega0 @ wf[:-1].T).T))
    source = 0.0
    if ap.f is not None:
        ff = disc.restrict(ap.f)
        source = disc.dt * float(np.sum(zf[1:] * (disc.M @ ff.T).T))
    return {"terminal": terminal, "initial": initial, "control": control, "source": source}


def duality_residual(fp: ForwardProblem, ap: AdjointProblem, z: SpaceTimeField,
                     w: SpaceTimeField, relative=False) -> float:
    """``|<z(T), w_T> - <z0, w(0)> - dt sum <g, w>_omega0 - dt sum <z, f>|``.

    With ``relative`` the residual is divided by the sum of the absolute
    values of the terms (0 when all terms vanish).
    """
    t = duality_terms(fp, ap, z, w)
    res = abs(t["terminal"] - t["initial"] - t["control"] - t["source"])
    if relative:
        scale = sum(abs(v) for v in t.values())
        return res / scale if scale > 0 else 0.0
    return res


@dataclass(frozen=True)
class EnergyEstimate:
    lhs: float
    data_norm: float

    @property
    def ratio(self) -> float:
        if self.data_norm == 0:
            return 0.0
        return self.lhs / self.data_norm


def verify_energy_estimate(z: SpaceTimeField, p: ForwardProblem) -> EnergyEstimate:
    """``max_n ||z^n||_M^2 + dt sum ||z^n||_K^2`` against ``||z0||^2 + dt sum ||chi g^n||^2``."""
    disc = p.disc
    zf = disc.restrict(z.values)
    l2 = np.einsum("ni,ni->n", zf, (disc.M @ zf.T).T)
    en = np.einsum("ni,ni->n", zf[1:], (disc.K @ zf[1:].T).T)
    lhs = float(l2.max() + disc.dt * en.sum())
    data = float(l2[0])
    if p.g is not None:
        gf = disc.restrict(p.g)
        data += disc.dt * float(np.einsum("ni,ni->", gf, (disc.M_omega0 @ gf.T).T))
    return EnergyEstimate(lhs, data)


def norm_series(disc: Discretization, z: SpaceTimeField) -> np.ndarray:
    """Columns ``t, ||z||_L2, ||z||_H`` per time slice."""
    zf = disc.restrict(z.values)
    l2 = np.sqrt(np.maximum(np.einsum("ni,ni->n", zf, (disc.M @ zf.T).T), 0))
    h1 = np.sqrt(np.maximum(np.einsum("ni,ni->n", zf, (disc.K @ zf.T).T), 0))
    return np.column_stack([z.times(), l2, h1])


# -- eigen-Galerkin realization -------------------------------------------

@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """M-orthonormal eigenpairs of the discrete operator ``K v = mu M v``."""

    eigenvalues: np.ndarray
    modes: np.ndarray  # (free, m)


def galerkin_basis(disc: Discretization, m: int | None = None, max_free=200) -> GalerkinBasis:
    """Dense generalized eigensolve; restricted to tiny meshes."""
    nfree = len(disc.free)
    if nfree > max_free:
        raise ValueError(f"eigen-Galerkin limited to {max_free} free nodes (got {nfree})")
    mu, V = sla.eigh(disc.K.toarray(), disc.M.toarray())
    m = nfree if m is None else m
    return GalerkinBasis(mu[:m], V[:, :m])


def solve_forward_galerkin(p: ForwardProblem, basis: GalerkinBasis) -> SpaceTimeField:
    """Implicit Euler on the modal ODE system ``d' + diag(mu) d = G``.

    ``d(0)`` is the M-projection of ``z0`` onto the modes and the control
    enters through ``G_k = (chi g, w_k)``.
    """
    disc = p.disc
    V, mu = basis.modes, basis.eigenvalues
    d = np.empty((disc.steps + 1, len(mu)))
    d[0] = V.T @ (disc.M @ disc.restrict(p.z0))
    G = None
    if p.g is not None:
        G = (V.T @ (disc.M_omega0 @ disc.restrict(p.g).T)).T
    for n in range(disc.steps):
        rhs = d[n] if G is None else d[n] + disc.dt * G[n]
        d[n + 1] = rhs / (1 + disc.dt * mu)
    return SpaceTimeField(disc.extend(d @ V.T), disc.dt)
