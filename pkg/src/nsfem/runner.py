"""Simulation orchestration: mesh/dofmap setup, stepping, diagnostics."""

import logging

import numpy as np
from dataclasses import dataclass, field

from .diagnostics import DiagnosticsRecord, compute_errors, compute_invariants
from .fields import FeField
from .projection import (project_divfree, project_half_speed,
                         project_l2, solve_stokes)
from .schemes import make_stepper, StepError
from .transport import scalar_mass, step_transport_bdf2

logger = logging.getLogger(__name__)


@dataclass
class ProbeSchedule:
    """Which steps get diagnostics records and VTK snapshots."""

    stride: int = 1
    vtk_stride: int = 0
    compute_errors: bool = True
    keep_fields: bool = False


@dataclass
class SimulationResult:
    problem: object
    cfg: object
    mesh: object
    dofmap: object
    dofmap_proj: object
    records: list = field(default_factory=list)
    states: list = None
    final_state: object = None
    scalar_field: object = None
    snapshots: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


class SimulationAborted(Exception):
    """A step failed mid-run; partial records are preserved on .result."""

    def __init__(self, message, result, cause):
        super().__init__(message)
        self.result = result
        self.cause = cause


def initial_fields(problem, dofmap, cfg):
    """Initial (u, p) per the problem's recipe.

    Exact-solution problems take the L2 projection of the initial
    velocity onto the discretely divergence-free subspace and the L2
    projection of the initial pressure; the channel starts from the
    steady Stokes solution of its boundary data.

    The rotational scheme advances its pressure explicitly, and under
    the conserving convection form that scalar is the Bernoulli pressure
    p - |u|^2/2; the initial pressure is shifted accordingly so the
    scheme starts from its own conjugate variable.
    """
    if problem.initial_kind == "stokes":
        return solve_stokes(dofmap, nu=cfg.nu,
                            grad_div_gamma=cfg.grad_div_gamma)
    u0 = project_divfree(dofmap, problem.initial_velocity, quad_degree=10)
    if problem.initial_pressure is not None:
        p0 = project_l2(dofmap, "pressure", problem.initial_pressure,
                        quad_degree=10)
        if cfg.scheme == "rot_proj_b" and cfg.form == "emac":
            shift = project_half_speed(dofmap, u0,
                                       quad_degree=cfg.quad_degree)
            p0 = FeField("pressure", p0.coeffs - shift.coeffs)
    else:
        p0 = FeField("pressure", np.zeros(dofmap.n_pressure_dofs))
    return u0, p0


def _record_for(state, problem, dofmap, cfg, probes, c_field=None):
    energy, momentum, ang, div_norm = compute_invariants(
        state.u, dofmap, quad_degree=cfg.quad_degree, center=problem.center)
    l2 = h1 = float("nan")
    if probes.compute_errors and problem.has_exact:
        t = state.t
        l2, h1 = compute_errors(
            state.u,
            lambda x, y: problem.exact_velocity(x, y, t),
            (lambda x, y: problem.exact_velocity_grad(x, y, t))
            if problem.exact_velocity_grad else None,
            dofmap)
    rec = DiagnosticsRecord(
        step=state.step_index, t=state.t, energy=energy, momentum=momentum,
        angular_momentum=ang, div_norm=div_norm, l2_error=l2, h1_error=h1,
        slack=state.slack, u_tilde_norm=state.u_tilde_norm,
        du_norm=state.du_norm, grad_u_tilde_norm=state.grad_u_tilde_norm,
        f_work=state.f_work, newton_iters=state.newton_iters)
    if c_field is not None:
        rec.scalar_mass = scalar_mass(c_field, dofmap, cfg.quad_degree)
    return rec


def run_simulation(problem, cfg, probes=None, nx=None, ny=None,
                   preset="desk", pattern="right"):
    """Step a problem from t = 0 to cfg.t_end, collecting diagnostics.

    Probes fire every ``probes.stride`` steps plus the initial and final
    states.  Assembly and solves are deterministic, so two runs of the
    same configuration produce identical records.  A failing step raises
    SimulationAborted carrying the partial result.
    """
    if probes is None:
        probes = ProbeSchedule()
    mesh = problem.build_mesh(nx=nx, ny=ny, preset=preset, pattern=pattern)
    dofmap, dofmap_proj, _ = problem.build_dofmaps(mesh)
    if cfg.dt >= mesh.h ** 3:
        logger.warning(
            "dt=%g is not below h^3=%g; discrete solutions may be "
            "non-unique at this resolution", cfg.dt, mesh.h ** 3)

    stepper = make_stepper(cfg, dofmap, dofmap_proj, forcing=problem.forcing)
    u0, p0 = initial_fields(problem, dofmap, cfg)
    state = stepper.initial_state(u0, p0)

    c_prev2 = None
    c_field = None
    if problem.transport is not None:
        c_field = project_l2(dofmap, "scalar", problem.transport.initial,
                             quad_degree=cfg.quad_degree)

    result = SimulationResult(
        problem=problem, cfg=cfg, mesh=mesh, dofmap=dofmap,
        dofmap_proj=dofmap_proj,
        states=[] if probes.keep_fields else None,
        metadata={
            "problem": problem.name,
            "angular_momentum_center": problem.center,
            "mesh_h": mesh.h,
            "n_triangles": mesh.n_triangles,
        })

    def probe(st, final=False):
        if st.step_index % probes.stride == 0 or final or st.step_index == 0:
            result.records.append(
                _record_for(st, problem, dofmap, cfg, probes, c_field))
            if probes.vtk_stride and (st.step_index % probes.vtk_stride == 0
                                      or final):
                result.snapshots.append((st.step_index, st.u.copy(),
                                         st.p.copy()))
        if result.states is not None:
            result.states.append(st)

    probe(state)
    n_steps = cfg.n_steps
    for _ in range(n_steps):
        try:
            new_state = stepper.step(state)
        except StepError as exc:
            result.final_state = state
            result.scalar_field = c_field
            raise SimulationAborted(
                f"run aborted at step {exc.step_index}: {exc}", result, exc)
        if problem.transport is not None:
            c_new = step_transport_bdf2(
                c_field, c_prev2, new_state.u, problem.transport.eps,
                cfg.dt, dofmap, quad_degree=cfg.quad_degree)
            c_prev2, c_field = c_field, c_new
        state = new_state
        probe(state, final=state.step_index == n_steps)

    result.final_state = state
    result.scalar_field = c_field
    return result
