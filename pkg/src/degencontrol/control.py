"""Penalized HUM control synthesis, observability ratios and unique-continuation probes.

The Gramian ``Lambda wT`` is the terminal state of the forward problem driven
from rest by ``g = chi_omega0 w`` where ``w`` solves the adjoint with terminal
value ``wT``.  Since the backward recursion is the exact transpose of the
forward one, ``Lambda`` is self-adjoint and positive semidefinite in the
M-inner product, and ``(Lambda + penalty I) wT = rhs`` is solved by conjugate
gradients in that inner product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .evolution import Discretization, SpaceTimeField


def control_from_adjoint(disc: Discretization, w: SpaceTimeField) -> SpaceTimeField:
    """``g^n = chi_omega0 w^n`` for the ``steps`` control intervals."""
    return SpaceTimeField(disc.mask_omega0(w.values[:-1]), disc.dt)


def gramian_apply(wT, disc: Discretization) -> np.ndarray:
    """Terminal state of the forward solve from rest driven by the adjoint of ``wT``."""
    w = disc.adjoint(wT)
    z = disc.forward(np.zeros(disc.mesh.n_nodes), control_from_adjoint(disc, w))
    return z[-1]


def control_cost(disc: Discretization, g: SpaceTimeField) -> float:
    """``dt * sum_n ||g^n||^2_{M, omega0}``."""
    gf = disc.restrict(g.values)
    return disc.dt * float(np.einsum("ni,ni->", gf, (disc.M_omega0 @ gf.T).T))


@dataclass(frozen=True)
class CGInfo:
    iterations: int
    residual: float
    converged: bool


def cg_penalized(disc: Discretization, rhs, penalty: float, rtol=1e-10, maxiter=None):
    """Conjugate gradients for ``(Lambda + penalty I) x = rhs`` in the M-inner product.

    Returns ``(x, CGInfo)``; raises :class:`ConvergenceError` past the cap
    ``10 * sqrt(#free nodes)``.
    """
    if maxiter is None:
        maxiter = int(10 * np.sqrt(len(disc.free)))
    M = disc.M
    b = disc.restrict(rhs)
    x = np.zeros_like(b)
    r = b.copy()
    rr = float(r @ (M @ r))
    bnorm = np.sqrt(rr)
    if bnorm == 0:
        return disc.extend(x), CGInfo(0, 0.0, True)

    def apply(v):
        return disc.restrict(gramian_apply(disc.extend(v), disc)) + penalty * v

    p = r.copy()
    it = 0
    while np.sqrt(rr) > rtol * bnorm:
        if it >= maxiter:
            raise ConvergenceError(
                f"CG did not reach rtol={rtol:g} in {maxiter} iterations "
                f"(residual {np.sqrt(rr) / bnorm:.3g}); penalty too small for this mesh?",
                iterations=it, residual=float(np.sqrt(rr) / bnorm))
        Ap = apply(p)
        a = rr / float(p @ (M @ Ap))
        x += a * p
        r -= a * Ap
        rr_new = float(r @ (M @ r))
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return disc.extend(x), CGInfo(it, float(np.sqrt(rr) / bnorm), True)


@dataclass(eq=False)
class ControlResult:
    g: SpaceTimeField
    terminal_state: np.ndarray
    terminal_norm: float
    control_cost: float
    cg_iterations: int
    penalty: float
    wT_star: np.ndarray
    target: np.ndarray
    free_terminal: np.ndarray
    identity_residual: float

    @property
    def miss(self) -> float:
        """``||z(T) - target||_M`` (the terminal norm for null control)."""
        return self.terminal_norm


def _synthesize(disc: Discretization, z0, target, penalty, rtol, maxiter) -> ControlResult:
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    z0 = np.asarray(z0, dtype=float)
    target = np.zeros(disc.mesh.n_nodes) if target is None else np.asarray(target, dtype=float)
    z_free = disc.forward(z0)[-1]
    x, info = cg_penalized(disc, target - z_free, penalty, rtol, maxiter)
    g = control_from_adjoint(disc, disc.adjoint(x))
    # independent re-solve with the returned control
    zT = disc.forward(z0, g)[-1]
    miss = disc.norm_M(zT - target)
    ident = disc.norm_M(zT - target + penalty * x)
    return ControlResult(g, zT, miss, control_cost(disc, g), info.iterations, float(penalty),
                         x, target, z_free, ident)


def hum_null_control(z0, penalty: float, disc: Discretization, rtol=1e-10,
                     maxiter=None) -> ControlResult:
    """Penalized HUM steering ``z0`` toward zero: ``(Lambda + p I) wT = -z_free(T)``.

    The terminal state satisfies ``z(T) = -penalty * wT``; ``identity_residual``
    records ``||z(T) + penalty wT||_M`` from an independent forward solve.
    """
    if disc.tags is not None and disc.tags.case != "interior":
        raise ValueError("null control is set up for the interior case (0 in omega0)")
    return _synthesize(disc, z0, None, penalty, rtol, maxiter)


def approximate_control(z0, z_target, penalty: float, disc: Discretization, rtol=1e-10,
                        maxiter=None) -> ControlResult:
    """Penalized HUM toward ``z_target``: ``(Lambda + p I) wT = z_target - z_free(T)``."""
    if disc.tags is not None and disc.tags.case != "offcenter":
        raise ValueError("approximate control is set up for the offcenter case")
    return _synthesize(disc, z0, z_target, penalty, rtol, maxiter)


def omega_energy(disc: Discretization, w: SpaceTimeField) -> float:
    """``dt * sum_{n<N} ||w^n||^2_{M, omega0}``."""
    wf = disc.restrict(w.values[:-1])
    return disc.dt * float(np.einsum("ni,ni->", wf, (disc.M_omega0 @ wf.T).T))


def global_energy(disc: Discretization, w: SpaceTimeField) -> float:
    wf = disc.restrict(w.values[:-1])
    return disc.dt * float(np.einsum("ni,ni->", wf, (disc.M @ wf.T).T))


@dataclass(frozen=True)
class ObservabilityReport:
    ratios: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))


def observability_ratio(samples, disc: Discretization) -> ObservabilityReport:
    """``||w(0)||^2_M / (dt sum ||w^n||^2_{M,omega0})`` per terminal sample.

    Raises ``ArithmeticError`` if a nonzero sample is invisible on omega0.
    """
    ratios = []
    for wT in samples:
        if disc.norm_M(wT) == 0:
            raise ValueError("observability samples must be nonzero")
        w = disc.adjoint(wT)
        den = omega_energy(disc, w)
        if den <= 0:
            raise ArithmeticError("nonzero adjoint state invisible on omega0")
        ratios.append(disc.norm_M(w[0]) ** 2 / den)
    return ObservabilityReport(np.array(ratios))


@dataclass(frozen=True)
class ContinuationProbe:
    omega_energy: float
    global_energy: float
    flag: bool


def unique_continuation_probe(wT, disc: Discretization, threshold: float) -> ContinuationProbe:
    """Flag adjoint states whose omega0 energy is below ``threshold`` times the global one."""
    w = disc.adjoint(wT)
    eo, eg = omega_energy(disc, w), global_energy(disc, w)
    return ContinuationProbe(eo, eg, bool(eg > 0 and eo < threshold * eg))
