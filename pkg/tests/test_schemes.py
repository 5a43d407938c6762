"""Step-level behavior of the three time discretizations."""

import numpy as np
import pytest

from nsfem.assemble import assemble_bilinear
from nsfem.diagnostics import l2_norm
from nsfem.fields import FeField
from nsfem.linsolve import NewtonConfig
from nsfem.problems import problem_gresho, problem_planar_lattice
from nsfem.projection import project_divfree
from nsfem.runner import initial_fields
from nsfem.schemes import (SchemeConfig, StepError, make_stepper)


def _setup(prob, nx, scheme, form, nu, dt, t_end=None, newton=None, gamma=0.0):
    mesh = prob.build_mesh(nx=nx, ny=nx)
    dm, dmp, _ = prob.build_dofmaps(mesh)
    cfg = SchemeConfig(scheme=scheme, form=form, nu=nu, dt=dt,
                       t_end=t_end if t_end is not None else dt,
                       grad_div_gamma=gamma,
                       newton=newton or NewtonConfig())
    stepper = make_stepper(cfg, dm, dmp, forcing=prob.forcing)
    return mesh, dm, dmp, cfg, stepper


@pytest.mark.parametrize("scheme", ["coupled_cn", "be_proj", "rot_proj_b"])
def test_zero_is_a_fixed_point(scheme):
    prob = problem_planar_lattice()
    _, dm, _, _, stepper = _setup(prob, 8, scheme, "emac", 0.01, 0.01)
    zero_u = FeField("velocity", np.zeros(dm.n_velocity_dofs))
    zero_p = FeField("pressure", np.zeros(dm.n_pressure_dofs))
    state = stepper.step(stepper.initial_state(zero_u, zero_p))
    assert np.abs(state.u.coeffs).max() == 0.0
    assert np.abs(state.p.coeffs).max() == 0.0
    if state.u_tilde is not None:
        assert np.abs(state.u_tilde.coeffs).max() == 0.0


def test_coupled_cn_inviscid_energy_constant():
    prob = problem_gresho()
    _, dm, _, _, stepper = _setup(prob, 12, "coupled_cn", "emac", 0.0, 0.01)
    u0, p0 = initial_fields(prob, dm, stepper.cfg)
    state = stepper.initial_state(u0, p0)
    E0 = 0.5 * stepper._mass_norm(state.u.coeffs) ** 2
    B = assemble_bilinear("divergence", dm)
    red_p = dm.reduction("pressure")
    prev = state
    for _ in range(5):
        state = stepper.step(state)
        E = 0.5 * stepper._mass_norm(state.u.coeffs) ** 2
        assert abs(E - E0) <= 1e-10 * E0
        # the mass constraint acts on the midpoint velocity
        u_mid = 0.5 * (state.u.coeffs + prev.u.coeffs)
        assert np.abs(red_p.R.T @ (B @ u_mid)).max() < 1e-10
        prev = state


def test_coupled_cn_one_step_self_convergence():
    # halving the step size reduces the one-step self-difference by the
    # second-order factor (close to 4)
    prob = problem_planar_lattice()
    newton = NewtonConfig(abs_tol=1e-13, rel_tol=1e-13, max_iter=30)
    mesh, dm, dmp, _, _ = _setup(prob, 16, "coupled_cn", "emac", 4e-6, 1e-3)

    def advance(dt, nsteps):
        cfg = SchemeConfig(scheme="coupled_cn", form="emac", nu=4e-6,
                           dt=dt, t_end=dt * nsteps, newton=newton)
        stepper = make_stepper(cfg, dm, dmp)
        u0, p0 = initial_fields(prob, dm, cfg)
        state = stepper.initial_state(u0, p0)
        for _ in range(nsteps):
            state = stepper.step(state)
        return state.u.coeffs

    T = 1e-3
    u1 = advance(T, 1)
    u2 = advance(T / 2, 2)
    u4 = advance(T / 4, 4)
    e12 = l2_norm(FeField("velocity", u1 - u2), dm)
    e24 = l2_norm(FeField("velocity", u2 - u4), dm)
    assert e12 / e24 >= 3.5


def test_be_proj_projection_fixes_divfree_fields():
    # a discretely divergence-free tentative velocity passes through the
    # projection unchanged with zero pressure
    prob = problem_planar_lattice()
    _, dm, dmp, cfg, stepper = _setup(prob, 8, "be_proj", "emac", 0.01, 0.01)
    ut = project_divfree(dm, lambda x, y: (np.sin(2 * np.pi * y),
                                           np.cos(2 * np.pi * x)))
    u, P = stepper.projection.solve(stepper.M @ ut.coeffs / cfg.dt)
    nrm = l2_norm(ut, dm)
    assert l2_norm(FeField("velocity", u.coeffs - ut.coeffs), dm) < 1e-11 * nrm
    assert np.abs(P.coeffs).max() < 1e-10 * nrm


def test_be_proj_energy_inequality_and_projection_invariants():
    prob = problem_planar_lattice()
    _, dm, dmp, cfg, stepper = _setup(prob, 8, "be_proj", "emac", 4e-6, 0.01,
                                      t_end=0.05)
    u0, p0 = initial_fields(prob, dm, cfg)
    state = stepper.initial_state(u0, p0)
    B = assemble_bilinear("divergence", dm)
    red_p = dm.reduction("pressure")
    u0_sq = state.u_tilde_norm ** 2
    for _ in range(5):
        prev = state
        state = stepper.step(state)
        # per-step energy-inequality slack (zero forcing)
        assert state.slack <= 1e-9 * u0_sq
        # projected velocity is discretely divergence-free
        wd = np.abs(red_p.R.T @ (B @ state.u.coeffs)).max()
        assert wd <= 1e-9 * l2_norm(state.u, dm)
        # projection never increases the norm
        nu_ = stepper._mass_norm(state.u.coeffs)
        nt_ = stepper._mass_norm(state.u_tilde.coeffs)
        assert nu_ <= nt_ * (1.0 + 1e-12)


@pytest.mark.parametrize("form", ["emac", "skew"])
def test_be_proj_momentum_zero_with_walls(form):
    prob = problem_gresho()
    _, dm, dmp, cfg, stepper = _setup(prob, 12, "be_proj", form, 0.0, 0.01)
    u0, p0 = initial_fields(prob, dm, cfg)
    state = stepper.initial_state(u0, p0)
    from nsfem.diagnostics import compute_invariants
    for _ in range(3):
        state = stepper.step(state)
        _, momentum, _, _ = compute_invariants(state.u, dm)
        assert np.abs(momentum).max() < 1e-12


def test_rot_proj_divfree_tentative_keeps_pressure():
    # when div(ut) = 0 the scalar increment vanishes, the pressure is
    # unchanged, and the velocity recovery returns ut itself
    prob = problem_planar_lattice()
    _, dm, dmp, cfg, stepper = _setup(prob, 8, "rot_proj_b", "emac", 0.01, 0.01)
    ut = project_divfree(dm, lambda x, y: (np.sin(2 * np.pi * y),
                                           np.cos(2 * np.pi * x)))
    red_p = dm.reduction("pressure")
    rhs = np.concatenate([-(red_p.R.T @ (stepper.B @ ut.coeffs)) / cfg.dt,
                          [0.0]])
    phi = red_p.expand(stepper.poisson.solve(rhs)[:-1])
    assert np.abs(phi).max() < 1e-10 * l2_norm(ut, dm)
    u, _ = stepper.projection.solve(stepper.M @ ut.coeffs / cfg.dt)
    assert l2_norm(FeField("velocity", u.coeffs - ut.coeffs), dm) \
        < 1e-11 * l2_norm(ut, dm)


def test_rot_proj_step_reduces_weak_divergence():
    prob = problem_gresho()
    _, dm, dmp, cfg, stepper = _setup(prob, 12, "rot_proj_b", "emac", 0.0, 0.01)
    u0, p0 = initial_fields(prob, dm, cfg)
    state = stepper.step(stepper.initial_state(u0, p0))
    B = assemble_bilinear("divergence", dm)
    red_p = dm.reduction("pressure")
    wd = np.abs(red_p.R.T @ (B @ state.u.coeffs)).max()
    assert wd < 1e-9 * l2_norm(state.u, dm)
    assert np.isfinite(state.p.coeffs).all()


def test_newton_divergence_surfaces_as_step_error():
    prob = problem_gresho()
    newton = NewtonConfig(abs_tol=1e-14, rel_tol=1e-14, max_iter=1)
    _, dm, dmp, cfg, stepper = _setup(prob, 8, "be_proj", "emac", 0.0, 5.0,
                                      newton=newton)
    u0, p0 = initial_fields(prob, dm, cfg)
    state = stepper.initial_state(u0, p0)
    with pytest.raises(StepError) as err:
        stepper.step(state)
    assert err.value.step_index == 1
    assert getattr(err.value.cause, "history", None)


def test_config_validation():
    with pytest.raises(ValueError, match="unknown scheme"):
        SchemeConfig(scheme="ipcs")
    with pytest.raises(ValueError, match="unknown form"):
        SchemeConfig(form="rotational")
    with pytest.raises(ValueError, match="dt"):
        SchemeConfig(dt=-0.1)
    with pytest.raises(ValueError, match="nu"):
        SchemeConfig(nu=-1.0)
    cfg = SchemeConfig(dt=0.01, t_end=1.0)
    assert cfg.n_steps == 100


def test_grad_div_stabilized_step_runs():
    prob = problem_planar_lattice()
    _, dm, dmp, cfg, stepper = _setup(prob, 8, "coupled_cn", "emac", 1e-3,
                                      0.01, gamma=1.0)
    u0, p0 = initial_fields(prob, dm, cfg)
    state = stepper.step(stepper.initial_state(u0, p0))
    E0 = 0.5 * stepper._mass_norm(u0.coeffs) ** 2
    E1 = 0.5 * stepper._mass_norm(state.u.coeffs) ** 2
    assert E1 <= E0 * (1 + 1e-12)


def test_bernoulli_to_physical_pressure_recovery():
    # p = P + |u|^2/2 projected onto the pressure space, zero mean
    prob = problem_gresho()
    _, dm, dmp, cfg, stepper = _setup(prob, 12, "be_proj", "emac", 0.0, 0.01)
    from nsfem.fields import interpolate
    from nsfem.projection import project_l2
    u = interpolate(dm, "velocity",
                    lambda x, y: (np.sin(2 * np.pi * x), np.cos(2 * np.pi * y)))
    P = interpolate(dm, "pressure", lambda x, y: x - y)
    state = stepper.initial_state(u, P)
    p_phys = stepper.bernoulli_to_physical(state)
    expected = project_l2(
        dm, "pressure",
        lambda x, y: (x - y)
        + 0.5 * (np.sin(2 * np.pi * x) ** 2 + np.cos(2 * np.pi * y) ** 2))
    shift = expected.coeffs.mean() - p_phys.coeffs.mean()
    # the projection of |u_h|^2/2 differs from the projection of the
    # closure only by interpolation error of u
    diff = np.abs(p_phys.coeffs + shift - expected.coeffs).max()
    assert diff < 5e-3
