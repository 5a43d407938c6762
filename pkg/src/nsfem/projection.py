"""L2 and divergence-free projections, and the shared mixed saddle solver."""

import numpy as np
import scipy.sparse as sp

from .assemble import assemble_bilinear, assemble_load, mean_vector
from .fields import FeField
from .linsolve import Factorization


class MixedSystem:
    """Velocity/pressure saddle system with constraints folded in.

    Assembles and factorizes
        [ A   -B^T  0 ] [u]   [b_u]
        [ B    0    m ] [p] = [b_p]
        [ 0   m^T   0 ] [mu]  [0  ]
    on the reduced (constraint-free) unknowns, where m enforces the zero
    pressure mean when requested.  Dirichlet lifts contribute constant
    terms to both right-hand sides; they are precomputed here so repeated
    solves only pay for forward/back substitution.
    """

    def __init__(self, A_full, B_full, dofmap, zero_mean=True,
                 velocity_space="velocity", factorize=True):
        self.dofmap = dofmap
        self.red_u = dofmap.reduction(velocity_space)
        self.red_p = dofmap.reduction("pressure")
        self.zero_mean = zero_mean
        Ru, Rp = self.red_u.R, self.red_p.R

        A_red = (Ru.T @ A_full @ Ru).tocsr()
        B_red = (Rp.T @ B_full @ Ru).tocsr()
        self.n_u = A_red.shape[0]
        self.n_p = B_red.shape[0]
        g = self.red_u.g
        self.lift_u = A_full @ g if self.red_u.has_lift else None
        self.lift_p = B_full @ g if self.red_u.has_lift else None

        if zero_mean:
            m = Rp.T @ mean_vector(dofmap)
            K = sp.bmat([
                [A_red, -B_red.T, None],
                [B_red, None, sp.csr_matrix(m.reshape(-1, 1))],
                [None, sp.csr_matrix(m.reshape(1, -1)), None],
            ], format="csr")
        else:
            K = sp.bmat([[A_red, -B_red.T], [B_red, None]], format="csr")
        K.sort_indices()
        self.matrix = K
        self.factorization = Factorization(K) if factorize else None

    def solve(self, b_u_full, b_p_red=None):
        """Solve for (u, p) given a full-space velocity load vector.

        Returns (u_full, p_full) with constraints applied to u and the
        multiplier dropped.
        """
        bu = np.asarray(b_u_full, dtype=float)
        if self.lift_u is not None:
            bu = bu - self.lift_u
        bu = self.red_u.R.T @ bu
        bp = np.zeros(self.n_p) if b_p_red is None else np.asarray(b_p_red)
        if self.lift_p is not None:
            bp = bp - self.red_p.R.T @ self.lift_p
        rhs = np.concatenate([bu, bp, [0.0]] if self.zero_mean
                             else [bu, bp])
        x = self.factorization.solve(rhs)
        u = self.red_u.expand(x[:self.n_u])
        p = self.red_p.expand(x[self.n_u:self.n_u + self.n_p])
        return FeField("velocity", u), FeField("pressure", p)


def project_half_speed(dofmap, u, quad_degree=6):
    """L2 projection of |u|^2 / 2 onto the pressure space.

    The offset between the physical pressure and the scalar conjugate to
    the energy-momentum-conserving convection form.
    """
    from .assemble import tabulate, velocity_values
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, _ = velocity_values(tab, u)
    half_speed = 0.5 * np.einsum("eqa,eqa->eq", u_q, u_q)
    loc = np.einsum("eq,qk,eq->ek", tab.W, tab.N1, half_speed, optimize=True)
    b = np.zeros(dofmap.n_pressure_dofs)
    np.add.at(b, tab.edofs_p.ravel(), loc.ravel())
    Mp = assemble_bilinear("mass", dofmap, space="pressure")
    red = dofmap.reduction("pressure")
    return FeField("pressure",
                   red.expand(Factorization(red.reduce_matrix(Mp)).solve(
                       red.reduce_rhs(b, A=Mp))))


def project_l2(dofmap, space, func, quad_degree=8):
    """Constrained L2 projection of a closure onto a discrete space."""
    M = assemble_bilinear("mass", dofmap, quad_degree=quad_degree, space=space)
    b = assemble_load(dofmap, func, space=space, quad_degree=quad_degree)
    red = dofmap.reduction(space)
    x = Factorization(red.reduce_matrix(M)).solve(red.reduce_rhs(b, A=M))
    return FeField(space, red.expand(x))


def project_divfree(dofmap, func, quad_degree=8, velocity_space="velocity"):
    """L2 projection onto the discretely divergence-free subspace.

    Minimizes the L2 distance to the closure subject to (div u, q) = 0
    for every pressure test function; the saddle multiplier is the
    associated pressure-like field and is discarded.
    """
    M = assemble_bilinear("mass", dofmap)
    B = assemble_bilinear("divergence", dofmap)
    sys = MixedSystem(M, B, dofmap, zero_mean=dofmap.pressure_zero_mean,
                      velocity_space=velocity_space)
    b = assemble_load(dofmap, func, space="velocity", quad_degree=quad_degree)
    u, _ = sys.solve(b)
    return u


def solve_stokes(dofmap, nu, grad_div_gamma=0.0, forcing=None, quad_degree=8):
    """Steady Stokes solve with optional grad-div stabilization.

    Dirichlet data comes from the dofmap constraints (e.g. inflow
    profiles); do-nothing boundaries are natural.  Returns (u, p).
    """
    K = assemble_bilinear("stiffness", dofmap)
    B = assemble_bilinear("divergence", dofmap)
    A = nu * K
    if grad_div_gamma:
        A = A + grad_div_gamma * assemble_bilinear("grad_div", dofmap)
    sys = MixedSystem(A.tocsr(), B, dofmap,
                      zero_mean=dofmap.pressure_zero_mean)
    if forcing is None:
        b = np.zeros(dofmap.n_velocity_dofs)
    else:
        b = assemble_load(dofmap, forcing, space="velocity",
                          quad_degree=quad_degree)
    return sys.solve(b)
