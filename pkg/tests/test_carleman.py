import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from degencontrol import (CoefficientField, build_eta_interior, build_eta_offcenter,
                          carleman_sweep, evaluate_carleman_case1, evaluate_carleman_case2,
                          find_thresholds, make_weights, select_epsilon, verify_weight)
from degencontrol.carleman import cutoff_interior, cutoff_offcenter, morse_profile
from degencontrol.errors import NoEpsilonFound, WeightVerificationFailed
from degencontrol.evolution import SpaceTimeField
from degencontrol.fields import random_smooth_field, smooth_bump
from degencontrol.geometry import Ball

from conftest import SQUARE

COEFF = CoefficientField(1.0)


@pytest.fixture(scope="module")
def eta_int(square_mesh, interior_tags):
    return build_eta_interior(square_mesh, interior_tags, COEFF)


@pytest.fixture(scope="module")
def eta_off(fine_square_mesh, offcenter_tags):
    return build_eta_offcenter(fine_square_mesh, offcenter_tags, COEFF)


# -- cutoffs -------------------------------------------------------------

def test_offcenter_cutoff_values():
    eps = 0.05
    h, _ = cutoff_offcenter(np.array([0.0, eps / 2, eps, 2 * eps, 1.0]), eps)
    assert h[0] == 0.0
    assert h[1] == pytest.approx(0.5, abs=1e-15)
    assert np.all(h[2:] == 1.0)


@pytest.mark.parametrize("cutoff,knots", [(cutoff_offcenter, (0.5, 1.0)),
                                          (cutoff_interior, (1.0, 2.0))])
def test_cutoff_continuity(cutoff, knots):
    eps = 0.05
    for k in knots:
        r = k * eps
        lo, hi = np.nextafter(r, 0), np.nextafter(r, 1)
        (h_lo, h_hi), (d_lo, d_hi) = cutoff(np.array([lo, hi]), eps)
        assert abs(h_lo - h_hi) <= 1e-12
        assert abs(d_lo - d_hi) <= 1e-12 / eps


def test_offcenter_blend_is_hermite_cubic():
    eps = 0.05
    a, b = eps / 2, eps
    # 4 matching conditions: values 1/2, 1 and slopes 2/eps, 0
    V = np.array([[1, a, a**2, a**3], [1, b, b**2, b**3],
                  [0, 1, 2 * a, 3 * a**2], [0, 1, 2 * b, 3 * b**2]])
    c = np.linalg.solve(V, [0.5, 1.0, 2 / eps, 0.0])
    r = np.linspace(a, b, 11)
    h, dh = cutoff_offcenter(r, eps)
    assert np.allclose(h, np.polyval(c[::-1], r), atol=1e-12)
    assert np.allclose(dh, np.polyval(np.polyder(c[::-1]), r), atol=1e-9)


def test_interior_cutoff_second_derivative():
    eps = 0.05
    r = np.array([eps, 2 * eps])
    d = 1e-6 * eps
    _, dp = cutoff_interior(r + d, eps)
    _, dm = cutoff_interior(r - d, eps)
    assert np.allclose((dp - dm) / (2 * d), 0.0, atol=1e-3 / eps**2)


# -- profiles and weights -----------------------------------------------

@given(px=st.floats(-0.8, 0.8), py=st.floats(-0.8, 0.8))
def test_box_profile_peak(px, py):
    prof = morse_profile(SQUARE, (px, py))
    z, g = prof(np.array([[px, py]]))
    assert z[0] == pytest.approx(1.0)
    assert np.allclose(g, 0.0, atol=1e-12)
    zb, _ = prof(np.array([[-1.0, 0.2], [1.0, -0.3], [0.4, 1.0], [0.1, -1.0]]))
    assert np.allclose(zb, 0.0, atol=1e-15)


def test_ball_profile_peak():
    disk = Ball(0.1, 0.0, 1.0)
    prof = morse_profile(disk, (0.5, 0.2))
    z, g = prof(np.array([[0.5, 0.2]]))
    assert z[0] == pytest.approx(1.0)
    assert np.allclose(g, 0.0, atol=1e-12)


def test_eta_interior_properties(square_mesh, eta_int):
    r = np.linalg.norm(square_mesh.vertices, axis=1)
    assert np.all(eta_int.values[r <= eta_int.eps] == 0)
    assert np.all(eta_int.grad[r <= eta_int.eps] == 0)
    assert np.all(eta_int.values[square_mesh.boundary] == 0)
    assert np.all(eta_int.values[~square_mesh.boundary & (r > eta_int.eps)] > 0)
    assert eta_int.c_star > 0
    assert eta_int.boundary_slope < 0


def test_eta_offcenter_properties(fine_square_mesh, eta_off):
    assert eta_off.c_star > 0
    assert eta_off.boundary_slope < 0
    assert eta_off.values[fine_square_mesh.origin_index] == 0


def test_eta_disk_both_cases():
    from degencontrol import build_graded_mesh, tag_regions

    mesh = build_graded_mesh(Ball(0.1, 0.0, 1.0), 0.08)
    t1 = tag_regions(mesh, Ball(0.1, 0.0, 0.1), Ball(0.0, 0.0, 0.5), 0.05, "interior")
    assert build_eta_interior(mesh, t1, COEFF).c_star > 0
    t2 = tag_regions(mesh, Ball(0.5, 0.1, 0.12), Ball(0.5, 0.1, 0.25), 0.04, "offcenter")
    assert build_eta_offcenter(mesh, t2, COEFF).c_star > 0


def test_case_mismatch(square_mesh, fine_square_mesh, interior_tags, offcenter_tags):
    with pytest.raises(ValueError):
        build_eta_offcenter(square_mesh, interior_tags, COEFF)
    with pytest.raises(ValueError):
        build_eta_interior(fine_square_mesh, offcenter_tags, COEFF)


def test_verification_catches_support(square_mesh, interior_tags, eta_int):
    bad = dataclasses.replace(eta_int, values=eta_int.values.copy())
    bad.values[square_mesh.origin_index] = 1e-3
    with pytest.raises(WeightVerificationFailed) as info:
        verify_weight(bad, square_mesh, interior_tags, COEFF)
    assert "Omega_eps" in info.value.quantity


def test_verification_catches_sign(square_mesh, interior_tags, eta_int):
    flipped = lambda p: tuple(-v for v in eta_int.profile(p))
    bad = dataclasses.replace(eta_int, values=-eta_int.values, profile=flipped)
    with pytest.raises(WeightVerificationFailed):
        verify_weight(bad, square_mesh, interior_tags, COEFF)


def test_verification_catches_critical_point(square_mesh, interior_tags, eta_int):
    # a profile peaked outside omega0 has a critical point where the gradient must not vanish
    pts = square_mesh.quadrature_points().reshape(-1, 2)
    peak = pts[np.argmin(np.linalg.norm(pts - [0.7, 0.7], axis=1))]
    prof = morse_profile(SQUARE, peak)
    bad = dataclasses.replace(eta_int, profile=prof)
    with pytest.raises(WeightVerificationFailed) as info:
        verify_weight(bad, square_mesh, interior_tags, COEFF)
    assert info.value.point is not None


# -- space-time weights ------------------------------------------------

def test_theta_midpoint(eta_int):
    cw = make_weights(eta_int, 1.0, 1.0, 1.0, delta=0.1)
    assert cw.theta(0.5) == 256.0


@given(s=st.floats(0.1, 10), lam=st.floats(0.1, 8), t=st.floats(0.02, 0.48))
def test_weight_identity(eta_int, s, lam, t):
    cw = make_weights(eta_int, s, lam, 0.5, delta=0.01)
    xi = cw.xi(eta_int.values, np.array([t]))
    sig = cw.sigma(eta_int.values, np.array([t]))
    top = cw.theta(t) * np.exp(10 * lam * eta_int.sup)
    assert np.allclose(xi + sig, top, rtol=1e-12, atol=0)
    assert np.all(xi > 0) and np.all(sig > 0)
    zero = eta_int.values == 0
    assert np.allclose(xi[0, zero], cw.theta(t) * np.exp(8 * lam * eta_int.sup), rtol=1e-13)


def test_theta_shape(eta_int):
    T = 0.5
    cw = make_weights(eta_int, 1.0, 1.0, T, delta=0.01)
    t = np.linspace(0.01, T - 0.01, 101)
    th = cw.theta(t)
    assert np.allclose(th, th[::-1], rtol=1e-12)
    assert np.argmin(th) == 50
    assert th[50] == pytest.approx((T**2 / 4) ** -4)
    assert cw.theta(1e-6) > 1e20


def test_make_weights_validation(eta_int):
    with pytest.raises(ValueError):
        make_weights(eta_int, 0.0, 1.0, 1.0, delta=0.1)
    with pytest.raises(ValueError):
        make_weights(eta_int, 1.0, 1.0, 1.0, delta=0.6)
    assert make_weights(eta_int, 1.0, 1.0, 1.0, dt=0.01).delta == 0.02


# -- epsilon selection --------------------------------------------------

def smallness_holds(u, mesh, tags, eps):
    """Direct re-check of both smallness inequalities, element by element."""
    pts = mesh.quadrature_points()
    w = mesh.quadrature_weights()
    uq = mesh.evaluate_at_quadrature(u)
    g = mesh.element_gradients(u)
    energy = np.broadcast_to((COEFF.weight(pts)) * np.sum(g**2, axis=1)[:, None], w.shape)
    r = np.linalg.norm(pts, axis=-1)
    inner = r < eps
    outer = ~inner & ~tags.omega.contains(pts.reshape(-1, 2)).reshape(r.shape)
    ok0 = np.sum((w * uq**2)[inner]) <= 0.25 * np.sum((w * uq**2)[outer])
    ok1 = np.sum((w * energy)[inner]) <= 0.25 * np.sum((w * energy)[outer])
    return ok0 and ok1


def test_select_eps_far_support(fine_square_mesh, offcenter_tags):
    u = fine_square_mesh.interpolate(lambda p: smooth_bump(p, (-0.6, -0.5), 0.25))
    ch = select_epsilon(u, fine_square_mesh, offcenter_tags, COEFF)
    assert not ch.trivial
    assert ch.eps == pytest.approx(offcenter_tags.eps0 / 18)


def test_select_eps_zero(fine_square_mesh, offcenter_tags):
    ch = select_epsilon(np.zeros(fine_square_mesh.n_nodes), fine_square_mesh, offcenter_tags,
                        COEFF)
    assert ch.trivial
    assert ch.eps == pytest.approx(offcenter_tags.eps0 / 18)


def test_select_eps_origin_bump(fine_square_mesh, offcenter_tags):
    u = fine_square_mesh.interpolate(lambda p: smooth_bump(p, (0.0, 0.0), 0.6))
    ch = select_epsilon(u, fine_square_mesh, offcenter_tags, COEFF)
    assert smallness_holds(u, fine_square_mesh, offcenter_tags, ch.eps)
    if ch.k > 1:
        assert not smallness_holds(u, fine_square_mesh, offcenter_tags, 2 * ch.eps)


def test_select_eps_concentrated(fine_square_mesh, offcenter_tags):
    u = fine_square_mesh.interpolate(lambda p: smooth_bump(p, (0.0, 0.0), 0.06))
    with pytest.raises(NoEpsilonFound):
        select_epsilon(u, fine_square_mesh, offcenter_tags, COEFF)


# -- inequality functionals --------------------------------------------------

def adjoint_sample(disc, seed):
    return disc.adjoint(random_smooth_field(disc.mesh, np.random.default_rng(seed)))


def test_case1_zero(interior_disc, interior_tags, eta_int):
    cw = make_weights(eta_int, 1.0, 1.0, interior_disc.T, dt=interior_disc.dt)
    w = SpaceTimeField(np.zeros((interior_disc.steps + 1, interior_disc.mesh.n_nodes)),
                       interior_disc.dt)
    ev = evaluate_carleman_case1(interior_disc, w, None, cw, interior_tags)
    assert (ev.lhs, ev.rhs, ev.ratio) == (0.0, 0.0, 0.0)


@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_case1_joint_scaling(interior_disc, interior_tags, eta_int, c, seed):
    disc = interior_disc
    cw = make_weights(eta_int, 2.0, 1.0, disc.T, dt=disc.dt)
    w = adjoint_sample(disc, seed)
    f = np.random.default_rng(seed).normal(size=(disc.steps, disc.mesh.n_nodes))
    a = evaluate_carleman_case1(disc, w, f, cw, interior_tags)
    b = evaluate_carleman_case1(disc, w.scaled(c), c * f, cw, interior_tags)
    assert b.log_lhs - a.log_lhs == pytest.approx(2 * np.log(c), abs=1e-9)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-9)


@given(s=st.floats(0.1, 20), lam=st.floats(0.1, 10), seed=st.integers(0, 1000))
def test_case1_ratio_at_least_one_without_source(interior_disc, interior_tags, eta_int,
                                                 s, lam, seed):
    # with f = 0 the right side is the omega0 part of one left-side term
    cw = make_weights(eta_int, s, lam, interior_disc.T, dt=interior_disc.dt)
    ev = evaluate_carleman_case1(interior_disc, adjoint_sample(interior_disc, seed), None, cw,
                                 interior_tags)
    assert ev.ratio >= 1.0


def test_case_guards(interior_disc, interior_tags, offcenter_tags, eta_int, eta_off):
    w = adjoint_sample(interior_disc, 0)
    with pytest.raises(ValueError):
        evaluate_carleman_case1(interior_disc, w, None,
                                make_weights(eta_off, 1, 1, 0.5, dt=0.025), offcenter_tags)
    with pytest.raises(ValueError):
        evaluate_carleman_case2(interior_disc, w, None,
                                make_weights(eta_int, 1, 1, 0.5, dt=0.025), interior_tags)


def test_case2_finite_and_adapts(offcenter_disc, offcenter_tags, eta_off):
    cw = make_weights(eta_off, 1.0, 2.0, offcenter_disc.T, dt=offcenter_disc.dt)
    w = adjoint_sample(offcenter_disc, 4)
    ev = evaluate_carleman_case2(offcenter_disc, w, None, cw, offcenter_tags)
    assert np.isfinite(ev.ratio) and ev.ratio > 0
    assert 0 < ev.eps < offcenter_tags.eps0 / 9
    ev2 = evaluate_carleman_case2(offcenter_disc, w.scaled(7.0), None, cw, offcenter_tags)
    assert ev2.ratio == pytest.approx(ev.ratio, rel=1e-9)


def test_sweep_and_thresholds(interior_disc, interior_tags, eta_int):
    samples = [adjoint_sample(interior_disc, k) for k in range(3)]
    rows = carleman_sweep(interior_disc, interior_tags, eta_int, samples, [1, 2], [0.5, 4])
    assert len(rows) == 12
    assert {r.run_id for r in rows} == {0, 1, 2}
    assert find_thresholds(rows) is None
    worst = max(r.ratio for r in rows)
    assert find_thresholds(rows, bound=worst) == (1.0, 0.5)
