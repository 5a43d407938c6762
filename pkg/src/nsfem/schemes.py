"""Time-stepping state machines for the incompressible solver.

Three schemes share the assembled Taylor-Hood operators:

coupled_cn   midpoint (Crank-Nicolson) fully coupled velocity/pressure
             solve; the convection and viscous terms act on the midpoint
             velocity and the divergence constraint is imposed on it.
be_proj      backward-Euler pressure-correction: an unconstrained
             advection-diffusion step for the tentative velocity,
             followed by an exact mixed L2 projection onto the
             discretely divergence-free subspace (normal trace
             constrained only), which also yields the pressure-like
             scalar of the step.
rot_proj_b   incremental rotational pressure correction: a midpoint
             momentum step against the lagged pressure, a scalar Poisson
             solve for the pressure increment, the rotational pressure
             update, and the divergence-free velocity recovery.

Dirichlet data is static in time; each step solves its nonlinear system
by full Newton started from the previous time level.
"""

import logging

import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass, field

from .assemble import (assemble_bilinear, assemble_convection, assemble_load,
                       mean_vector)
from .dofmap import bordered_system
from .fields import FeField
from .linsolve import Factorization, NewtonConfig, newton_solve
from .projection import MixedSystem

logger = logging.getLogger(__name__)

SCHEMES = ("coupled_cn", "be_proj", "rot_proj_b")
FORMS = ("emac", "skew", "conv")


@dataclass
class SchemeConfig:
    """Time discretization parameters shared by all schemes."""

    scheme: str = "coupled_cn"
    form: str = "emac"
    nu: float = 1.0
    dt: float = 0.01
    t_end: float = 1.0
    grad_div_gamma: float = 0.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    quad_degree: int = 6
    deterministic: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}; choose from {FORMS}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end != 0.0 and self.t_end < self.dt:
            raise ValueError("t_end must be zero or at least one time step")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.grad_div_gamma < 0:
            raise ValueError("grad_div_gamma must be nonnegative")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class TimeState:
    """Solver state after step ``step_index`` (time t = step_index * dt)."""

    t: float
    step_index: int
    u: FeField
    p: FeField
    u_tilde: FeField = None
    # per-step bookkeeping for energy/stability diagnostics
    u_tilde_norm: float = None
    du_norm: float = 0.0
    grad_u_tilde_norm: float = None
    slack: float = 0.0
    f_work: float = 0.0
    newton_iters: int = 0


class StepError(Exception):
    """A time step failed; carries the step index and underlying error."""

    def __init__(self, message, step_index, cause=None):
        super().__init__(message)
        self.step_index = step_index
        self.cause = cause


class _StepperBase:
    """Operators and bookkeeping shared by the concrete schemes."""

    def __init__(self, cfg, dofmap, dofmap_proj=None, forcing=None):
        self.cfg = cfg
        self.dofmap = dofmap
        self.dofmap_proj = dofmap_proj if dofmap_proj is not None else dofmap
        self.forcing = forcing
        deg = cfg.quad_degree
        self.M = assemble_bilinear("mass", dofmap, quad_degree=deg)
        self.K = assemble_bilinear("stiffness", dofmap, quad_degree=deg)
        self.B = assemble_bilinear("divergence", dofmap, quad_degree=deg)
        self.GD = None
        if cfg.grad_div_gamma > 0:
            self.GD = assemble_bilinear("grad_div", dofmap, quad_degree=deg)
        self.red_u = dofmap.reduction("velocity")
        self.red_p = dofmap.reduction("pressure")
        self.m_full = mean_vector(dofmap)

    def _load(self, t):
        if self.forcing is None:
            return None
        return assemble_load(self.dofmap,
                             lambda x, y: self.forcing(x, y, t),
                             space="velocity", quad_degree=self.cfg.quad_degree)

    def _mass_norm(self, coeffs):
        return float(np.sqrt(max(coeffs @ (self.M @ coeffs), 0.0)))

    def _grad_norm(self, coeffs):
        return float(np.sqrt(max(coeffs @ (self.K @ coeffs), 0.0)))

    def initial_state(self, u0, p0=None):
        u0.check(self.dofmap)
        if p0 is None:
            p0 = FeField("pressure", np.zeros(self.dofmap.n_pressure_dofs))
        return TimeState(
            t=0.0, step_index=0, u=u0, p=p0, u_tilde=u0.copy(),
            u_tilde_norm=self._mass_norm(u0.coeffs),
            grad_u_tilde_norm=self._grad_norm(u0.coeffs))

    def _viscous_blocks(self, scale_visc):
        ops = [(scale_visc * self.cfg.nu, self.K)]
        if self.GD is not None:
            ops.append((scale_visc * self.cfg.grad_div_gamma, self.GD))
        return ops


class CoupledCrankNicolson(_StepperBase):
    """Fully coupled midpoint scheme solved by Newton per step."""

    def __init__(self, cfg, dofmap, forcing=None):
        super().__init__(cfg, dofmap, dofmap, forcing)
        Ru, Rp = self.red_u.R, self.red_p.R
        self.B_red = (Rp.T @ self.B @ Ru).tocsr()
        self.m_red = Rp.T @ self.m_full
        self.n_ur = self.red_u.n_free
        self.n_pr = self.red_p.n_free
        self.zero_mean = dofmap.pressure_zero_mean

    def step(self, state):
        cfg = self.cfg
        dt = cfg.dt
        t_mid = state.t + 0.5 * dt
        f_vec = self._load(t_mid)
        u_prev = state.u.coeffs
        red_u, red_p = self.red_u, self.red_p
        m_col = sp.csr_matrix(self.m_red.reshape(-1, 1))

        def residual(z):
            u_r = z[:self.n_ur]
            p_r = z[self.n_ur:self.n_ur + self.n_pr]
            u_full = red_u.expand(u_r)
            p_full = red_p.expand(p_r)
            u_mid = 0.5 * (u_full + u_prev)
            Nm, Mm = assemble_convection(cfg.form, FeField("velocity", u_mid),
                                         "jacobian_pair", self.dofmap,
                                         quad_degree=cfg.quad_degree)
            r_mom = (self.M @ (u_full - u_prev)) / dt + Nm @ u_mid \
                - self.B.T @ p_full
            for coef, op in self._viscous_blocks(1.0):
                if coef:
                    r_mom = r_mom + coef * (op @ u_mid)
            if f_vec is not None:
                r_mom = r_mom - f_vec
            r_cont = red_p.R.T @ (self.B @ u_mid)
            A = self.M / dt + 0.5 * (Nm + Mm)
            for coef, op in self._viscous_blocks(0.5):
                if coef:
                    A = A + coef * op
            A_red = (red_u.R.T @ A @ red_u.R).tocsr()
            if self.zero_mean:
                mu = z[-1]
                F = np.concatenate([red_u.R.T @ r_mom,
                                    r_cont + self.m_red * mu,
                                    [self.m_red @ p_r]])
                J = sp.bmat([
                    [A_red, -self.B_red.T, None],
                    [0.5 * self.B_red, None, m_col],
                    [None, m_col.T, None],
                ], format="csr")
            else:
                F = np.concatenate([red_u.R.T @ r_mom, r_cont])
                J = sp.bmat([
                    [A_red, -self.B_red.T],
                    [0.5 * self.B_red, None],
                ], format="csr")
            return F, J

        z0 = np.concatenate([red_u.restrict(state.u.coeffs),
                             red_p.restrict(state.p.coeffs)]
                            + ([[0.0]] if self.zero_mean else []))
        try:
            z, iters = newton_solve(residual, z0, cfg.newton)
        except Exception as exc:
            raise StepError(f"coupled step {state.step_index + 1} failed: {exc}",
                            state.step_index + 1, cause=exc) from exc

        u_new = red_u.expand(z[:self.n_ur])
        p_new = red_p.expand(z[self.n_ur:self.n_ur + self.n_pr])
        u_mid = 0.5 * (u_new + u_prev)
        grad_mid = self._grad_norm(u_mid)
        f_work = dt * float(f_vec @ u_mid) if f_vec is not None else 0.0
        e_old = 0.5 * self._mass_norm(u_prev) ** 2
        e_new = 0.5 * self._mass_norm(u_new) ** 2
        slack = e_new - e_old + cfg.nu * dt * grad_mid ** 2 - f_work
        return TimeState(
            t=state.t + dt, step_index=state.step_index + 1,
            u=FeField("velocity", u_new), p=FeField("pressure", p_new),
            u_tilde=FeField("velocity", u_new),
            u_tilde_norm=self._mass_norm(u_new),
            du_norm=self._mass_norm(u_new - u_prev),
            grad_u_tilde_norm=grad_mid, slack=slack, f_work=f_work,
            newton_iters=iters)


class BackwardEulerProjection(_StepperBase):
    """Backward-Euler step plus exact mixed divergence-free projection."""

    def __init__(self, cfg, dofmap, dofmap_proj, forcing=None):
        super().__init__(cfg, dofmap, dofmap_proj, forcing)
        self.projection = MixedSystem(
            self.M / cfg.dt, self.B, self.dofmap_proj,
            zero_mean=self.dofmap_proj.pressure_zero_mean)

    def step(self, state):
        cfg = self.cfg
        dt = cfg.dt
        f_vec = self._load(state.t + dt)
        u_prev = state.u.coeffs
        red_u = self.red_u

        def residual(z):
            u_full = red_u.expand(z)
            Nm, Mm = assemble_convection(cfg.form, FeField("velocity", u_full),
                                         "jacobian_pair", self.dofmap,
                                         quad_degree=cfg.quad_degree)
            r = (self.M @ (u_full - u_prev)) / dt + Nm @ u_full
            for coef, op in self._viscous_blocks(1.0):
                if coef:
                    r = r + coef * (op @ u_full)
            if f_vec is not None:
                r = r - f_vec
            A = self.M / dt + Nm + Mm
            for coef, op in self._viscous_blocks(1.0):
                if coef:
                    A = A + coef * op
            return red_u.R.T @ r, (red_u.R.T @ A @ red_u.R).tocsr()

        try:
            z, iters = newton_solve(residual, red_u.restrict(u_prev), cfg.newton)
            u_tilde = red_u.expand(z)
            u_new, P_new = self.projection.solve(self.M @ u_tilde / dt)
        except StepError:
            raise
        except Exception as exc:
            raise StepError(
                f"projection step {state.step_index + 1} failed: {exc}",
                state.step_index + 1, cause=exc) from exc

        ut_norm = self._mass_norm(u_tilde)
        du_norm = self._mass_norm(u_tilde - u_prev)
        grad_ut = self._grad_norm(u_tilde)
        f_work = dt * float(f_vec @ u_tilde) if f_vec is not None else 0.0
        slack = 0.5 * (ut_norm ** 2 - state.u_tilde_norm ** 2 + du_norm ** 2) \
            + cfg.nu * dt * grad_ut ** 2 - f_work
        return TimeState(
            t=state.t + dt, step_index=state.step_index + 1,
            u=u_new, p=P_new, u_tilde=FeField("velocity", u_tilde),
            u_tilde_norm=ut_norm, du_norm=du_norm, grad_u_tilde_norm=grad_ut,
            slack=slack, f_work=f_work, newton_iters=iters)

    def bernoulli_to_physical(self, state):
        """Physical pressure p = P + |u|^2 / 2, projected to the pressure space.

        Post-processing only; never fed back into the dynamics.
        """
        from .projection import project_half_speed
        corr = project_half_speed(self.dofmap, state.u,
                                  quad_degree=self.cfg.quad_degree)
        p = state.p.coeffs + corr.coeffs
        area = float(self.m_full.sum())
        p = p - (self.m_full @ p) / area
        return FeField("pressure", p)


class RotationalProjection(_StepperBase):
    """Second-order rotational pressure-correction scheme."""

    def __init__(self, cfg, dofmap, dofmap_proj, forcing=None):
        super().__init__(cfg, dofmap, dofmap_proj, forcing)
        deg = cfg.quad_degree
        Kp = assemble_bilinear("stiffness", dofmap, quad_degree=deg,
                               space="pressure")
        Mp = assemble_bilinear("mass", dofmap, quad_degree=deg,
                               space="pressure")
        red_p = self.red_p
        m_red = red_p.R.T @ self.m_full
        self.poisson = Factorization(
            bordered_system(red_p.reduce_matrix(Kp), m_red))
        self.mass_p = Factorization(red_p.reduce_matrix(Mp))
        self.projection = MixedSystem(
            self.M / cfg.dt, self.B, self.dofmap_proj,
            zero_mean=self.dofmap_proj.pressure_zero_mean)
        self.area = float(self.m_full.sum())

    def _pressure_project_div(self, u_tilde):
        """L2 projection of div(u_tilde) onto the pressure space."""
        b = self.red_p.R.T @ (self.B @ u_tilde)
        return self.red_p.expand(self.mass_p.solve(b))

    def step(self, state):
        cfg = self.cfg
        dt = cfg.dt
        f_vec = self._load(state.t + 0.5 * dt)
        u_prev = state.u.coeffs
        p_prev = state.p.coeffs
        red_u, red_p = self.red_u, self.red_p
        grad_p_term = self.B.T @ p_prev

        def residual(z):
            u_full = red_u.expand(z)
            w = u_full + u_prev
            Nm, Mm = assemble_convection(cfg.form, FeField("velocity", w),
                                         "jacobian_pair", self.dofmap,
                                         quad_degree=cfg.quad_degree)
            r = (self.M @ (u_full - u_prev)) / dt + 0.25 * (Nm @ w) \
                - grad_p_term
            for coef, op in self._viscous_blocks(0.5):
                if coef:
                    r = r + coef * (op @ w)
            if f_vec is not None:
                r = r - f_vec
            A = self.M / dt + 0.25 * (Nm + Mm)
            for coef, op in self._viscous_blocks(0.5):
                if coef:
                    A = A + coef * op
            return red_u.R.T @ r, (red_u.R.T @ A @ red_u.R).tocsr()

        try:
            z, iters = newton_solve(residual, red_u.restrict(u_prev), cfg.newton)
            u_tilde = red_u.expand(z)
            # scalar increment: (grad phi, grad q) = -(div ut, q) / dt
            rhs = np.concatenate([
                -(red_p.R.T @ (self.B @ u_tilde)) / dt, [0.0]])
            phi = red_p.expand(self.poisson.solve(rhs)[:-1])
            div_proj = self._pressure_project_div(u_tilde)
            p_new = p_prev + 2.0 * phi - cfg.nu * div_proj
            p_new = p_new - (self.m_full @ p_new) / self.area
            u_new, _ = self.projection.solve(self.M @ u_tilde / dt)
        except StepError:
            raise
        except Exception as exc:
            raise StepError(
                f"rotational step {state.step_index + 1} failed: {exc}",
                state.step_index + 1, cause=exc) from exc

        ut_norm = self._mass_norm(u_tilde)
        f_work = dt * float(f_vec @ u_tilde) if f_vec is not None else 0.0
        return TimeState(
            t=state.t + dt, step_index=state.step_index + 1,
            u=u_new, p=FeField("pressure", p_new),
            u_tilde=FeField("velocity", u_tilde),
            u_tilde_norm=ut_norm,
            du_norm=self._mass_norm(u_tilde - u_prev),
            grad_u_tilde_norm=self._grad_norm(u_tilde),
            slack=float("nan"), f_work=f_work, newton_iters=iters)


def make_stepper(cfg, dofmap, dofmap_proj=None, forcing=None):
    """Instantiate the stepper selected by ``cfg.scheme``."""
    if cfg.scheme == "coupled_cn":
        return CoupledCrankNicolson(cfg, dofmap, forcing=forcing)
    if cfg.scheme == "be_proj":
        return BackwardEulerProjection(cfg, dofmap, dofmap_proj, forcing=forcing)
    return RotationalProjection(cfg, dofmap, dofmap_proj, forcing=forcing)
