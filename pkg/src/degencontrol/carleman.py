"""Carleman weights for both geometric cases and the weighted inequality functionals.

The spatial weight is ``eta = h * zeta`` where ``zeta`` is a closed-form
Morse-type profile (zero on the boundary, positive inside, single critical
point placed in the control region) and ``h`` a radial cutoff around the
degeneracy point.  Every constructed weight is verified on the mesh before
it is returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoEpsilonFound, WeightVerificationFailed
from .evolution import Discretization, SpaceTimeField
from .forms import CoefficientField, lumped_mass
from .geometry import Ball, Box
from .mesh import Mesh, RegionTags, retag_eps


# -- Morse-type profiles ----------------------------------------------------

def _mobius(u, q):
    """Monotone map of [0, 1] onto itself with ``q -> 1/2``; returns value and slope."""
    den = u * (1 - 2 * q) + q
    return u * (1 - q) / den, q * (1 - q) / den**2


def morse_profile(domain, peak) -> Callable:
    """Return ``f(points) -> (zeta, grad_zeta)`` with ``max zeta = zeta(peak) = 1``.

    Box: product of warped sines ``sin(pi tau_1(x)) sin(pi tau_2(y))``.
    Ball: ``(R^2 - |y|^2) exp(b . y)`` with ``b`` chosen so that the only
    interior critical point sits at ``peak``.
    """
    peak = np.asarray(peak, dtype=float)
    if not domain.contains(peak[None])[0]:
        raise ValueError("profile peak must lie inside the domain")
    if isinstance(domain, Box):
        lo = np.array([domain.x0, domain.y0])
        span = np.array([domain.x1 - domain.x0, domain.y1 - domain.y0])
        q = (peak - lo) / span

        def profile(pts):
            u = (np.asarray(pts) - lo) / span
            tau = np.empty_like(u)
            dtau = np.empty_like(u)
            for k in range(2):
                tau[..., k], dtau[..., k] = _mobius(u[..., k], q[k])
            s, c = np.sin(np.pi * tau), np.cos(np.pi * tau)
            ds = np.pi * c * dtau / span
            zeta = s[..., 0] * s[..., 1]
            grad = np.stack([ds[..., 0] * s[..., 1], s[..., 0] * ds[..., 1]], axis=-1)
            return zeta, grad

        return profile
    if isinstance(domain, Ball):
        c, R = domain.center, domain.radius
        ystar = peak - c
        t = np.linalg.norm(ystar)
        b = np.zeros(2) if t == 0 else (2 * t / (R**2 - t**2)) * ystar / t
        scale = (R**2 - t**2) * np.exp(b @ ystar)

        def profile(pts):
            y = np.asarray(pts) - c
            e = np.exp(y @ b)
            r2 = np.sum(y**2, axis=-1)
            zeta = (R**2 - r2) * e / scale
            grad = e[..., None] * (-2 * y + np.multiply.outer(R**2 - r2, b)) / scale
            return zeta, grad

        return profile
    raise ValueError(f"unsupported domain {domain!r}")


# -- radial cutoffs -----------------------------------------------------------

def cutoff_interior(r, eps):
    """Quintic smoothstep: 0 for r <= eps, 1 for r >= 2 eps, C^2 at both ends."""
    t = np.clip((np.asarray(r, dtype=float) - eps) / eps, 0.0, 1.0)
    h = t**3 * (10 - 15 * t + 6 * t**2)
    dh = 30 * t**2 * (1 - t) ** 2 / eps
    return h, dh


def cutoff_offcenter(r, eps):
    """``2 r^2 / eps^2`` up to ``eps/2``, 1 beyond ``eps``, C^1 quadratic blend between.

    The blend is the cubic Hermite interpolant of the values 1/2, 1 and
    slopes 2/eps, 0; its cubic coefficient vanishes, leaving
    ``1/2 + t - t^2/2`` with ``t = (2 r - eps) / eps``.
    """
    r = np.asarray(r, dtype=float)
    h = np.ones_like(r)
    dh = np.zeros_like(r)
    inner = r <= eps / 2
    h[inner] = 2 * r[inner] ** 2 / eps**2
    dh[inner] = 4 * r[inner] / eps**2
    mid = (r > eps / 2) & (r < eps)
    t = (2 * r[mid] - eps) / eps
    h[mid] = 0.5 + t - 0.5 * t**2
    dh[mid] = (1 - t) * 2 / eps
    return h, dh


CUTOFFS = {"interior": cutoff_interior, "offcenter": cutoff_offcenter}


# -- spatial weight -----------------------------------------------------------

@dataclass(eq=False)
class SpatialWeight:
    """Nodal data of ``eta = h * zeta`` plus its analytic evaluator."""

    values: np.ndarray
    h: np.ndarray
    zeta: np.ndarray
    grad: np.ndarray
    sup: float
    case: str
    eps: float
    peak: np.ndarray
    profile: Callable = field(repr=False)
    c_star: float = float("nan")
    boundary_slope: float = float("nan")

    def evaluate(self, pts):
        """``(eta, grad eta)`` at arbitrary points."""
        pts = np.asarray(pts, dtype=float)
        zeta, gz = self.profile(pts)
        r = np.linalg.norm(pts, axis=-1)
        h, dh = CUTOFFS[self.case](r, self.eps)
        with np.errstate(invalid="ignore", divide="ignore"):
            er = np.where(r[..., None] > 0, pts / r[..., None], 0.0)
        return h * zeta, h[..., None] * gz + (zeta * dh)[..., None] * er


def _build_eta(mesh: Mesh, tags: RegionTags, coeff: CoefficientField, case: str,
               peak=None, verify=True) -> SpatialWeight:
    if tags.case != case:
        raise ValueError(f"tags are for the {tags.case} case, not {case}")
    if mesh.domain is None:
        raise ValueError("mesh has no analytic domain attached")
    region = tags.omega0 if case == "interior" else tags.omega
    peak = region.center if peak is None else np.asarray(peak, dtype=float)
    if not region.contains(peak[None])[0]:
        raise ValueError("critical point of zeta must lie inside the control region")
    profile = morse_profile(mesh.domain, peak)
    zeta, gz = profile(mesh.vertices)
    r = np.linalg.norm(mesh.vertices, axis=1)
    h, _ = CUTOFFS[case](r, tags.eps)
    weight = SpatialWeight(np.empty(0), h, zeta, np.empty((0, 2)), 0.0, case, tags.eps,
                           peak, profile)
    eta, grad = weight.evaluate(mesh.vertices)
    boundary_value = float(np.max(np.abs(eta[mesh.boundary]), initial=0.0))
    eta = eta.copy()
    eta[mesh.boundary] = 0.0
    qeta, _ = weight.evaluate(mesh.quadrature_points())
    weight.values, weight.grad = eta, grad
    weight.zeta[mesh.boundary] = 0.0
    weight.sup = float(max(eta.max(), qeta.max(), weight.evaluate(peak)[0]))
    if verify:
        verify_weight(weight, mesh, tags, coeff, boundary_value)
    else:
        weight.c_star, weight.boundary_slope = weight_diagnostics(weight, mesh, tags, coeff)
    return weight


def build_eta_interior(mesh: Mesh, tags: RegionTags, coeff: CoefficientField,
                       peak=None, verify=True) -> SpatialWeight:
    """Weight for the case where the degeneracy point lies in omega0.

    ``eta`` vanishes on the ball of radius ``eps`` and on the boundary, is
    positive elsewhere, and has no critical point outside omega0.
    """
    return _build_eta(mesh, tags, coeff, "interior", peak, verify)


def build_eta_offcenter(mesh: Mesh, tags: RegionTags, coeff: CoefficientField,
                        peak=None, verify=True) -> SpatialWeight:
    """Weight for the case where the degeneracy point lies outside omega0."""
    return _build_eta(mesh, tags, coeff, "offcenter", peak, verify)


def _complement_points(weight: SpatialWeight, mesh: Mesh, tags: RegionTags):
    pts = mesh.quadrature_points().reshape(-1, 2)
    if weight.case == "interior":
        keep = ~tags.omega0.contains(pts)
    else:
        keep = ~tags.omega.contains(pts) & (np.linalg.norm(pts, axis=1) >= weight.eps)
    return pts[keep]


def _gradient_quantity(weight, coeff, pts):
    _, g = weight.evaluate(pts)
    q = coeff.weight(pts) * np.einsum("ni,nij,nj->n", g, coeff.matrix(pts), g)
    return q if weight.case == "interior" else q**2


def boundary_slopes(weight: SpatialWeight, mesh: Mesh) -> np.ndarray:
    """One-sided difference of eta along the outward normal at edge midpoints."""
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    mid = 0.5 * (a + b)
    delta = 0.25 * np.linalg.norm(b - a, axis=1)
    inner = mid - delta[:, None] * mesh.normals
    return (weight.evaluate(mid)[0] - weight.evaluate(inner)[0]) / delta


def weight_diagnostics(weight, mesh, tags, coeff):
    """``(c_star, max boundary slope)`` without raising."""
    pts = _complement_points(weight, mesh, tags)
    c_star = float(_gradient_quantity(weight, coeff, pts).min()) if len(pts) else float("inf")
    return c_star, float(boundary_slopes(weight, mesh).max())


def verify_weight(weight: SpatialWeight, mesh: Mesh, tags: RegionTags,
                  coeff: CoefficientField, boundary_value=0.0, floor=1e-10) -> SpatialWeight:
    """Check every structural property of the weight; record ``c_star``.

    The (unsquared) gradient quantity must exceed ``floor`` times its maximum
    over the sampled points, so a critical point hit by a quadrature node is not
    masked by rounding.

    Raises :class:`WeightVerificationFailed` naming the violated quantity and
    the offending point.
    """
    x = mesh.vertices
    r = np.linalg.norm(x, axis=1)
    eta = weight.values
    if boundary_value > 1e-12:
        raise WeightVerificationFailed("eta on boundary", value=boundary_value)
    interior_nodes = ~mesh.boundary
    if weight.case == "interior":
        inside = r <= weight.eps
        bad = np.flatnonzero(inside & (eta != 0))
        if len(bad):
            raise WeightVerificationFailed("eta = 0 on Omega_eps", x[bad[0]], eta[bad[0]])
        gbad = np.flatnonzero(inside & np.any(weight.grad != 0, axis=1))
        if len(gbad):
            raise WeightVerificationFailed("grad eta = 0 on closure of Omega_eps",
                                           x[gbad[0]], float(np.abs(weight.grad[gbad[0]]).max()))
        positive = interior_nodes & (r > weight.eps)
    else:
        positive = interior_nodes & (r > 0)
    bad = np.flatnonzero(positive & ~(eta > 0))
    if len(bad):
        raise WeightVerificationFailed("eta > 0", x[bad[0]], eta[bad[0]])

    pts = _complement_points(weight, mesh, tags)
    if len(pts):
        q = _gradient_quantity(weight, coeff, pts)
        k = int(np.argmin(q))
        base = q if weight.case == "interior" else np.sqrt(q)
        if not base[k] > floor * base.max():
            raise WeightVerificationFailed("|x|^a A grad eta . grad eta > 0 off the control region",
                                           pts[k], float(q[k]))
        weight.c_star = float(q[k])
    else:
        weight.c_star = float("inf")

    slopes = boundary_slopes(weight, mesh)
    k = int(np.argmax(slopes))
    if not slopes[k] < 0:
        mid = mesh.vertices[mesh.boundary_edges[k]].mean(axis=0)
        raise WeightVerificationFailed("d eta / dn < 0 on the boundary", mid, float(slopes[k]))
    weight.boundary_slope = float(slopes[k])
    return weight


# -- space-time weights -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CarlemanWeights:
    """``theta(t) = [t (T - t)]^-4``, ``xi = theta exp(lam (8 |eta| + eta))``,
    ``sigma = theta exp(10 lam |eta|) - xi``."""

    s: float
    lam: float
    T: float
    eta: SpatialWeight
    delta: float

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        return (t * (self.T - t)) ** -4

    def log_theta(self, t):
        t = np.asarray(t, dtype=float)
        return -4 * np.log(t * (self.T - t))

    def log_xi(self, eta_vals, t):
        return np.add.outer(self.log_theta(t), self.lam * (8 * self.eta.sup + np.asarray(eta_vals)))

    def xi(self, eta_vals, t):
        return np.exp(self.log_xi(eta_vals, t))

    def sigma(self, eta_vals, t):
        th = self.theta(t)
        top = np.exp(10 * self.lam * self.eta.sup)
        inner = np.exp(self.lam * (8 * self.eta.sup + np.asarray(eta_vals)))
        return np.multiply.outer(th, top - inner)

    def window(self, dt, steps):
        """Indices of time slices in ``[delta, T - delta]``."""
        t = dt * np.arange(steps + 1)
        tol = 1e-12 * self.T
        return np.flatnonzero((t >= self.delta - tol) & (t <= self.T - self.delta + tol))


def make_weights(eta: SpatialWeight, s: float, lam: float, T: float,
                 delta: float | None = None, dt: float | None = None) -> CarlemanWeights:
    """Carleman parameters; ``delta`` defaults to ``2 * dt``."""
    if delta is None:
        if dt is None:
            raise ValueError("need delta or dt")
        delta = 2 * dt
    if not (s > 0 and lam > 0):
        raise ValueError("s and lambda must be positive")
    if not 0 < delta < T / 2:
        raise ValueError("delta must lie in (0, T/2)")
    return CarlemanWeights(float(s), float(lam), float(T), eta, float(delta))


# -- epsilon selection --------------------------------------------------------

@dataclass(frozen=True)
class EpsilonChoice:
    eps: float
    trivial: bool
    k: int


def _quadrature_densities(u, mesh: Mesh, coeff: CoefficientField):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    pts = mesh.quadrature_points()
    W = mesh.quadrature_weights()
    B = coeff.weight(pts)[..., None, None] * coeff.matrix(pts)
    d0 = np.zeros(W.shape)
    d1 = np.zeros(W.shape)
    for row in u:
        d0 += mesh.evaluate_at_quadrature(row) ** 2
        g = mesh.element_gradients(row)
        d1 += np.einsum("md,mqde,me->mq", g, B, g)
    return pts, W * d0, W * d1


def select_epsilon(u, mesh: Mesh, tags: RegionTags, coeff: CoefficientField,
                   dt: float = 1.0) -> EpsilonChoice:
    """Largest ``eps`` on the grid ``eps0/9 * 2**-k`` (``k >= 1``) such that

        int_{|x|<eps} u^2            <= 1/4 int_{Omega \\ (omega u Omega_eps)} u^2
        int_{|x|<eps} |x|^a A du.du  <= 1/4 (same region, same integrand)

    ``u`` is nodal, or space-time with rows per slice (time-summed with ``dt``).
    The grid stops at half the smallest diameter of the elements touching the
    origin (one element ring).

    Raises :class:`NoEpsilonFound` if even the smallest grid radius fails.
    """
    pts, d0, d1 = _quadrature_densities(u, mesh, coeff)
    d0, d1 = dt * d0.ravel(), dt * d1.ravel()
    pts = pts.reshape(-1, 2)
    r = np.linalg.norm(pts, axis=1)
    in_omega = tags.omega.contains(pts)
    ring = np.any(mesh.triangles == mesh.origin_index, axis=1)
    h_origin = 0.5 * float(np.min(mesh.diameters[ring]))
    dist_omega = tags.omega.min_distance((0.0, 0.0))
    grid = []
    k = 1
    while True:
        e = tags.eps0 / 9 * 2.0**-k
        if e < h_origin:
            break
        if 2 * e < dist_omega:
            grid.append((k, e))
        k += 1
    if not grid:
        raise NoEpsilonFound("no admissible radius above the mesh resolution")

    def holds(e):
        inner = r < e
        outer = ~inner & ~in_omega
        return (d0[inner].sum() <= 0.25 * d0[outer].sum()
                and d1[inner].sum() <= 0.25 * d1[outer].sum())

    outside = ~in_omega
    if d0[outside].sum() == 0 and d1[outside].sum() == 0:
        k, e = grid[0]
        return EpsilonChoice(e, True, k)
    lo, hi = 0, len(grid) - 1
    if not holds(grid[hi][1]):
        raise NoEpsilonFound(
            f"smallness fails down to eps={grid[hi][1]:.3g}: field concentrated at the origin")
    # monotone in k: find the first index that holds
    while lo < hi:
        mid = (lo + hi) // 2
        if holds(grid[mid][1]):
            hi = mid
        else:
            lo = mid + 1
    k, e = grid[lo]
    return EpsilonChoice(e, False, k)


# -- inequality functionals ---------------------------------------------------

class _LogSum:
    """Accumulates ``log(sum_i exp(a_i) * v_i)`` for ``v_i >= 0`` without overflow."""

    def __init__(self):
        self.value = -np.inf

    def add(self, logw, vals):
        logw = np.broadcast_to(logw, np.shape(vals))
        mask = vals > 0
        if not np.any(mask):
            return
        lw = logw[mask]
        m = lw.max()
        self.value = np.logaddexp(self.value, m + np.log(np.sum(np.exp(lw - m) * vals[mask])))


@dataclass(frozen=True)
class CarlemanEvaluation:
    log_terms: dict
    log_lhs: float
    log_rhs: float
    eps: float
    case: str

    @property
    def lhs(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_lhs))

    @property
    def rhs(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_rhs))

    @property
    def ratio(self) -> float:
        if self.log_lhs == -np.inf:
            return 0.0
        if self.log_rhs == -np.inf:
            return float("inf")
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_lhs - self.log_rhs))


def _evaluate(disc: Discretization, w: SpaceTimeField, f, cw: CarlemanWeights,
              tags: RegionTags, full_gradient: bool, constants=(1.0, 1.0)) -> CarlemanEvaluation:
    mesh, coeff = disc.mesh, disc.coeff
    s, lam = cw.s, cw.lam
    W = w.values
    F = None if f is None else (f.values if isinstance(f, SpaceTimeField) else np.asarray(f))
    idx = cw.window(disc.dt, disc.steps)
    idx = idx[idx < disc.steps]
    t = idx * disc.dt

    free = ~mesh.boundary
    mL = disc.lumped
    mL0 = lumped_mass(mesh, tags.omega0_elems)
    eta_n = cw.eta.values
    pts = mesh.quadrature_points()
    Wq = mesh.quadrature_weights()
    eta_q, geta_q = cw.eta.evaluate(pts)
    coef_q = coeff.weight(pts)[..., None, None] * coeff.matrix(pts)
    a_q = np.einsum("mqij,mqj->mqi", coef_q, geta_q)
    K = disc.stiffness_form.full

    log_node = cw.log_xi(eta_n, t)  # (nt, nodes)
    log_quad = cw.log_xi(eta_q.ravel(), t)
    log_f = -2 * s * cw.sigma(eta_n, t)
    c_lhs, c_rhs = constants

    terms = {k: _LogSum() for k in ("time", "div", "zero", "grad_eta", "grad", "source", "local")}
    for j, n in enumerate(idx):
        wn = W[n]
        wt = (W[n + 1] - wn) / disc.dt
        div = np.zeros_like(wn)
        div[free] = -(K @ wn)[free] / mL[free]
        ln, lq = log_node[j], log_quad[j].reshape(eta_q.shape)
        terms["time"].add(-ln, mL * wt**2)
        terms["div"].add(-ln, mL * div**2)
        terms["zero"].add(3 * ln, mL * wn**2)
        terms["local"].add(3 * ln, mL0 * wn**2)
        g = mesh.element_gradients(wn)
        terms["grad_eta"].add(lq, Wq * np.einsum("mqi,mi->mq", a_q, g) ** 2)
        if full_gradient:
            terms["grad"].add(lq, Wq * np.einsum("mi,mqij,mj->mq", g, coef_q, g))
        if F is not None:
            terms["source"].add(log_f[j], mL * F[n] ** 2)

    lt = {k: v.value for k, v in terms.items()}
    log_s, log_l = np.log(s), np.log(lam)
    lhs_parts = [
        lt["time"] - log_s,
        lt["div"] - log_s,
        lt["zero"] + 3 * log_s + 4 * log_l,
        lt["grad_eta"] + log_s + 2 * log_l,
    ]
    if full_gradient:
        lhs_parts.append(lt["grad"] + log_s + 2 * log_l)
    rhs_parts = [lt["source"], lt["local"] + 3 * log_s + 4 * log_l]
    log_lhs = float(np.logaddexp.reduce(lhs_parts)) + np.log(c_lhs)
    log_rhs = float(np.logaddexp.reduce(rhs_parts)) + np.log(c_rhs)
    return CarlemanEvaluation(lt, log_lhs, log_rhs, cw.eta.eps, cw.eta.case)


def evaluate_carleman_case1(disc: Discretization, w: SpaceTimeField, f, cw: CarlemanWeights,
                            tags: RegionTags, constants=(1.0, 1.0)) -> CarlemanEvaluation:
    """Both sides of the weighted estimate for the case 0 in omega0.

    LHS: ``s^-1 xi^-1 (|w_t|^2 + |Div(|x|^a A grad w)|^2) + s^3 lam^4 xi^3 w^2
    + s lam^2 xi ||x|^a A grad eta . grad w|^2``; RHS: ``|e^{-s sigma} f|^2
    + s^3 lam^4 xi^3 w^2`` on omega0.  Space-time integrals run over the
    slices in ``[delta, T - delta]``; ``constants`` scale the two sides.
    """
    if cw.eta.case != "interior":
        raise ValueError("case-1 evaluation needs an interior-case weight")
    return _evaluate(disc, w, f, cw, tags, False, constants)


def evaluate_carleman_case2(disc: Discretization, w: SpaceTimeField, f, cw: CarlemanWeights,
                            tags: RegionTags, adapt_eps=True, constants=(1.0, 1.0),
                            max_rounds=6) -> CarlemanEvaluation:
    """Case 0 outside omega0: case-1 terms plus ``s lam^2 xi |x|^a A grad w . grad w``.

    With ``adapt_eps`` the radius of the weight is chosen per solution by
    :func:`select_epsilon` applied to ``u = exp(-s sigma) w`` (shifted by the
    minimal sigma so the field stays representable), rebuilding the weight
    until the radius is stable.
    """
    if cw.eta.case != "offcenter":
        raise ValueError("case-2 evaluation needs an offcenter-case weight")
    if adapt_eps:
        mesh = disc.mesh
        for _ in range(max_rounds):
            idx = cw.window(disc.dt, disc.steps)
            sig = cw.sigma(cw.eta.values, idx * disc.dt)
            u = np.exp(-cw.s * (sig - sig.min())) * w.values[idx]
            choice = select_epsilon(u, mesh, tags, disc.coeff, disc.dt)
            if np.isclose(choice.eps, cw.eta.eps, rtol=1e-12):
                break
            tags = retag_eps(tags, mesh, choice.eps)
            eta = build_eta_offcenter(mesh, tags, disc.coeff, peak=cw.eta.peak)
            cw = make_weights(eta, cw.s, cw.lam, cw.T, cw.delta)
    return _evaluate(disc, w, f, cw, tags, True, constants)


# -- threshold sweeps ---------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    case: str
    s: float
    lam: float
    eps: float
    delta: float
    lhs: float
    rhs: float
    ratio: float
    run_id: int


def carleman_sweep(disc: Discretization, tags: RegionTags, eta: SpatialWeight, samples,
                   s_grid, lam_grid, delta=None, adapt_eps=True):
    """Evaluate the case-appropriate functional for every (s, lambda, sample)."""
    rows = []
    for s in s_grid:
        for lam in lam_grid:
            cw = make_weights(eta, s, lam, disc.T, delta, disc.dt)
            for k, w in enumerate(samples):
                if eta.case == "interior":
                    ev = evaluate_carleman_case1(disc, w, None, cw, tags)
                else:
                    ev = evaluate_carleman_case2(disc, w, None, cw, tags, adapt_eps)
                rows.append(SweepRow(eta.case, float(s), float(lam), ev.eps, cw.delta,
                                     ev.lhs, ev.rhs, ev.ratio, k))
    return rows


def find_thresholds(rows, bound=1.0):
    """Smallest ``(s, lambda)`` (by product, then lambda) with every sample ratio <= bound.

    Returns ``None`` when no grid point qualifies.
    """
    worst = {}
    for row in rows:
        key = (row.s, row.lam)
        worst[key] = max(worst.get(key, 0.0), row.ratio)
    ok = [k for k, v in worst.items() if v <= bound]
    if not ok:
        return None
    return min(ok, key=lambda k: (k[0] * k[1], k[1]))


def min_worst_ratio(rows) -> float:
    worst = {}
    for row in rows:
        key = (row.s, row.lam)
        worst[key] = max(worst.get(key, 0.0), row.ratio)
    return min(worst.values())
