"""Conserved-quantity and error diagnostics for velocity fields.

All integrals are evaluated by element quadrature on the same tabulation
machinery used for assembly, but through direct functional evaluation
(no operator matrices), so checks against assembled operators are
independent routes.
"""

import numpy as np
from dataclasses import dataclass

from .assemble import tabulate, velocity_values, _values_at_points
from .fields import FeField

ERROR_QUAD_DEGREE = 8


@dataclass
class DiagnosticsRecord:
    """Per-probe invariants and errors of a simulation state."""

    step: int
    t: float
    energy: float
    momentum: np.ndarray
    angular_momentum: float
    div_norm: float
    l2_error: float = float("nan")
    h1_error: float = float("nan")
    slack: float = float("nan")
    # projection-scheme extras used by the energy-inequality checks
    u_tilde_norm: float = None
    du_norm: float = None
    grad_u_tilde_norm: float = None
    f_work: float = 0.0
    scalar_mass: float = None
    newton_iters: int = 0

    def csv_row(self):
        vals = [self.step, self.t, self.energy, self.momentum[0],
                self.momentum[1], self.angular_momentum, self.div_norm,
                self.l2_error, self.h1_error, self.slack]
        return vals


def compute_invariants(u, dofmap, quad_degree=6, center=(0.0, 0.0)):
    """Kinetic energy, momentum, angular momentum and ||div u||.

    Angular momentum is the scalar integral of
    (x1 - c1) u2 - (x2 - c2) u1 about ``center`` (default the origin).
    """
    u.check(dofmap)
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, grad_q = velocity_values(tab, u)
    W = tab.W
    energy = 0.5 * float(np.einsum("eq,eqa,eqa->", W, u_q, u_q))
    momentum = np.einsum("eq,eqa->a", W, u_q)
    xc = tab.xq[:, :, 0] - center[0]
    yc = tab.xq[:, :, 1] - center[1]
    ang = float(np.einsum("eq,eq->", W, xc * u_q[:, :, 1] - yc * u_q[:, :, 0]))
    div = grad_q[:, :, 0, 0] + grad_q[:, :, 1, 1]
    div_norm = float(np.sqrt(np.einsum("eq,eq->", W, div * div)))
    return energy, momentum, ang, div_norm


def l2_norm(u, dofmap, quad_degree=6):
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, _ = velocity_values(tab, u)
    return float(np.sqrt(np.einsum("eq,eqa,eqa->", tab.W, u_q, u_q)))


def h1_seminorm(u, dofmap, quad_degree=6):
    tab = tabulate(dofmap.mesh, quad_degree)
    _, g = velocity_values(tab, u)
    return float(np.sqrt(np.einsum("eq,eqab,eqab->", tab.W, g, g)))


def l2_inner(u, v, dofmap, quad_degree=6):
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, _ = velocity_values(tab, u)
    v_q, _ = velocity_values(tab, v)
    return float(np.einsum("eq,eqa,eqa->", tab.W, u_q, v_q))


def compute_errors(u, exact, exact_grad, dofmap, quad_degree=ERROR_QUAD_DEGREE):
    """L2 and H1-seminorm distance of ``u`` to an analytic field.

    ``exact(x, y)`` returns the two velocity components at arrays of
    points; ``exact_grad(x, y)`` returns the four gradient entries
    (du1/dx, du1/dy, du2/dx, du2/dy), or may be None to skip the H1 part.
    """
    u.check(dofmap)
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, grad_q = velocity_values(tab, u)
    ex = _values_at_points(exact, tab.xq, 2)
    d = u_q - ex
    l2 = float(np.sqrt(np.einsum("eq,eqa,eqa->", tab.W, d, d)))
    if exact_grad is None:
        return l2, float("nan")
    x = tab.xq[..., 0].ravel()
    y = tab.xq[..., 1].ravel()
    g = exact_grad(x, y)
    shape = tab.xq.shape[:2]
    ge = np.empty(shape + (2, 2))
    ge[..., 0, 0] = np.broadcast_to(g[0], x.shape).reshape(shape)
    ge[..., 0, 1] = np.broadcast_to(g[1], x.shape).reshape(shape)
    ge[..., 1, 0] = np.broadcast_to(g[2], x.shape).reshape(shape)
    ge[..., 1, 1] = np.broadcast_to(g[3], x.shape).reshape(shape)
    dg = grad_q - ge
    h1 = float(np.sqrt(np.einsum("eq,eqab,eqab->", tab.W, dg, dg)))
    return l2, h1


def div_weighted_inner(u, w, dofmap, quad_degree=6):
    """((div u) u, w) by direct quadrature.

    This is the independently assembled defect term that the skew form
    contributes to momentum and angular-momentum balances.
    """
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, g = velocity_values(tab, u)
    w_q, _ = velocity_values(tab, w)
    div = g[:, :, 0, 0] + g[:, :, 1, 1]
    return float(np.einsum("eq,eq,eqa,eqa->", tab.W, div, u_q, w_q))


def cutoff_test_fields(dofmap, center=None):
    """Constant and rotational test fields cut off at the boundary.

    Returns (psi_x, psi_y, phi): nodal interpolants of (1, 0), (0, 1) and
    the rotational field (-(y - c2), x - c1), set to zero at every
    boundary node so they lie in the constrained velocity space; the
    decay to zero happens across the single strip of elements touching
    the boundary.
    """
    mesh = dofmap.mesh
    if center is None:
        xmin, xmax, ymin, ymax = mesh.domain_box
        center = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
    coords = dofmap.node_coords()
    nb_vertex = mesh.boundary_vertices()
    nb_edge = mesh.n_vertices + mesh.boundary_edges
    bnodes = np.concatenate([nb_vertex, nb_edge])

    def make(fx, fy):
        c = np.empty(dofmap.n_velocity_dofs)
        c[0::2] = fx
        c[1::2] = fy
        c[2 * bnodes] = 0.0
        c[2 * bnodes + 1] = 0.0
        return FeField("velocity", c)

    ones = np.ones(coords.shape[0])
    zeros = np.zeros(coords.shape[0])
    psi_x = make(ones, zeros)
    psi_y = make(zeros, ones)
    phi = make(-(coords[:, 1] - center[1]), coords[:, 0] - center[0])
    return psi_x, psi_y, phi


def check_energy_inequality(records, nu, dt, kind="projection"):
    """Per-step energy slacks from a record stream.

    For projection runs the slack of step n+1 is
        (||ut^{n+1}||^2 - ||ut^n||^2 + ||ut^{n+1} - u^n||^2) / 2
        + nu dt ||grad ut^{n+1}||^2 - dt (f^{n+1}, ut^{n+1})
    recomputed from the stored intermediate-velocity norms (ut denotes
    the tentative velocity); nonpositive slacks up to solver tolerance
    certify the discrete energy inequality.  For coupled runs the slack
    is the plain energy-balance defect
        E^{n+1} - E^n + nu dt ||grad u_mid||^2 - dt f-work,
    which vanishes for the midpoint scheme up to Newton tolerance.
    """
    records = list(records)
    if len(records) < 2:
        return np.zeros(0)
    if kind == "projection":
        for r in records:
            if r.u_tilde_norm is None or r.grad_u_tilde_norm is None:
                raise ValueError(
                    f"record at t={r.t} lacks intermediate-velocity norms; "
                    "not a projection-scheme stream")
        slacks = []
        for prev, cur in zip(records[:-1], records[1:]):
            s = 0.5 * (cur.u_tilde_norm ** 2 - prev.u_tilde_norm ** 2
                       + cur.du_norm ** 2) \
                + nu * dt * cur.grad_u_tilde_norm ** 2 - cur.f_work
            slacks.append(s)
        return np.array(slacks)
    if kind == "coupled":
        slacks = []
        for prev, cur in zip(records[:-1], records[1:]):
            diss = 0.0
            if cur.grad_u_tilde_norm is not None:
                diss = nu * dt * cur.grad_u_tilde_norm ** 2
            slacks.append(cur.energy - prev.energy + diss - cur.f_work)
        return np.array(slacks)
    raise ValueError(f"unknown record stream kind {kind!r}")


def stability_bound_holds(records, nu, dt, rtol=1e-9):
    """Check the global unconditional-stability bound on an unforced run.

    ||ut^M||^2 + sum ||ut^{n+1} - u^n||^2 + nu dt sum ||grad ut^{n+1}||^2
    must not exceed ||u^0||^2 (plus a relative slack for roundoff).
    """
    records = list(records)
    u0_sq = records[0].u_tilde_norm ** 2
    acc = records[-1].u_tilde_norm ** 2
    for r in records[1:]:
        acc += r.du_norm ** 2 + nu * dt * r.grad_u_tilde_norm ** 2
    return acc <= u0_sq * (1.0 + rtol), acc, u0_sq
