import numpy as np
import pytest
from hypothesis import given, strategies as st

from degencontrol import (approximate_control, gramian_apply, hum_null_control,
                          observability_ratio, unique_continuation_probe)
from degencontrol.control import cg_penalized, omega_energy
from degencontrol.errors import ConvergenceError
from degencontrol.fields import random_smooth_field, sine_mode, smooth_bump


def test_gramian_zero(interior_disc):
    assert not np.any(gramian_apply(np.zeros(interior_disc.mesh.n_nodes), interior_disc))


def test_gramian_symmetric_psd(interior_disc, rng):
    disc = interior_disc
    for _ in range(20):
        a, b = (random_smooth_field(disc.mesh, rng) for _ in range(2))
        la, lb = gramian_apply(a, disc), gramian_apply(b, disc)
        lhs, rhs = disc.inner_M(la, b), disc.inner_M(a, lb)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))
        assert disc.inner_M(la, a) >= 0


def test_gramian_quadratic_form(interior_disc, rng):
    disc = interior_disc
    a = random_smooth_field(disc.mesh, rng)
    q = disc.inner_M(gramian_apply(a, disc), a)
    assert q == pytest.approx(omega_energy(disc, disc.adjoint(a)), rel=1e-12)


def test_null_control_trivial(interior_disc):
    res = hum_null_control(np.zeros(interior_disc.mesh.n_nodes), 1e-4, interior_disc)
    assert res.cg_iterations == 0
    assert res.terminal_norm == 0.0
    assert not np.any(res.g.values)


@pytest.fixture(scope="module")
def null_run(interior_disc):
    z0 = sine_mode(interior_disc.mesh)
    return z0, hum_null_control(z0, 1e-4, interior_disc)


def test_null_control_identity(interior_disc, null_run):
    z0, res = null_run
    assert res.identity_residual <= 1e-8 * interior_disc.norm_M(z0)
    assert res.terminal_norm == pytest.approx(res.penalty * interior_disc.norm_M(res.wT_star),
                                              rel=1e-6)


def test_null_control_self_consistent(interior_disc, null_run):
    z0, res = null_run
    zT = interior_disc.forward(z0, res.g)[-1]
    assert interior_disc.norm_M(zT) == pytest.approx(res.terminal_norm, rel=1e-10)
    assert np.array_equal(zT, res.terminal_state)


def test_control_support(interior_disc, null_run):
    _, res = null_run
    assert not np.any(res.g.values[:, ~interior_disc.omega0_nodes])
    assert res.g.steps == interior_disc.steps
    assert res.control_cost > 0


def test_null_control_linear(interior_disc, null_run):
    z0, res = null_run
    res2 = hum_null_control(2 * z0, 1e-4, interior_disc)
    assert np.max(np.abs(res2.g.values - 2 * res.g.values)) <= 1e-10 * np.abs(res.g.values).max()
    assert np.max(np.abs(res2.terminal_state - 2 * res.terminal_state)) <= (
        1e-10 * np.abs(z0).max())


def test_null_control_penalty_monotone(interior_disc):
    z0 = sine_mode(interior_disc.mesh)
    norms = [hum_null_control(z0, p, interior_disc).terminal_norm for p in (1e-2, 1e-3, 1e-4)]
    assert norms[0] > norms[1] > norms[2]


def test_null_control_guards(interior_disc, offcenter_disc):
    z0 = sine_mode(interior_disc.mesh)
    with pytest.raises(ValueError):
        hum_null_control(z0, 0.0, interior_disc)
    with pytest.raises(ValueError):
        hum_null_control(sine_mode(offcenter_disc.mesh), 1e-3, offcenter_disc)
    with pytest.raises(ValueError):
        approximate_control(z0, z0, 1e-3, interior_disc)


def test_cg_cap(interior_disc):
    z0 = sine_mode(interior_disc.mesh)
    with pytest.raises(ConvergenceError) as info:
        cg_penalized(interior_disc, -interior_disc.forward(z0)[-1], 1e-6, maxiter=3)
    assert info.value.iterations == 3


def test_approximate_trivial_target(offcenter_disc):
    z0 = sine_mode(offcenter_disc.mesh)
    target = offcenter_disc.forward(z0)[-1]
    res = approximate_control(z0, target, 1e-3, offcenter_disc)
    assert res.cg_iterations == 0
    assert not np.any(res.wT_star) and not np.any(res.g.values)


def test_approximate_monotone_and_identity(offcenter_disc):
    disc = offcenter_disc
    z0 = sine_mode(disc.mesh)
    target = disc.mesh.interpolate(lambda p: smooth_bump(p, (0.6, 0.0), 0.3))
    misses = []
    for p in (1e-2, 1e-3, 1e-4):
        res = approximate_control(z0, target, p, disc)
        assert res.miss == pytest.approx(p * disc.norm_M(res.wT_star), rel=1e-6)
        misses.append(res.miss)
    assert misses[0] >= misses[1] >= misses[2]


def test_observability_positive_and_homogeneous(interior_disc, rng):
    disc = interior_disc
    inside = disc.mesh.interpolate(lambda p: smooth_bump(p, (0.0, 0.1), 0.3))
    rep = observability_ratio([inside, 3.0 * inside], disc)
    assert np.all(np.isfinite(rep.ratios)) and np.all(rep.ratios > 0)
    assert rep.ratios[1] == pytest.approx(rep.ratios[0], rel=1e-12)
    assert rep.max == rep.ratios.max()
    with pytest.raises(ValueError):
        observability_ratio([np.zeros(disc.mesh.n_nodes)], disc)


def test_continuation_probe(interior_disc):
    disc = interior_disc
    zero = unique_continuation_probe(np.zeros(disc.mesh.n_nodes), disc, 1e-8)
    assert (zero.omega_energy, zero.global_energy, zero.flag) == (0.0, 0.0, False)
    bump = disc.mesh.interpolate(lambda p: smooth_bump(p, (0.1, 0.0), 0.2))
    probe = unique_continuation_probe(bump, disc, 1e-8)
    assert probe.omega_energy > 0 and not probe.flag
    assert unique_continuation_probe(bump, disc, 2.0).flag


@given(seed=st.integers(0, 2**32 - 1))
def test_continuation_random_no_flags(offcenter_disc, seed):
    wT = random_smooth_field(offcenter_disc.mesh, np.random.default_rng(seed))
    assert not unique_continuation_probe(wT, offcenter_disc, 1e-8).flag
