"""Passive-scalar advection-diffusion stepping on the quadratic space."""

import numpy as np

from .assemble import (assemble_bilinear, assemble_scalar_advection, tabulate,
                       scalar_values)
from .fields import FeField
from .linsolve import Factorization


def step_transport_bdf2(c_prev, c_prev2, u, eps, dt, dofmap, quad_degree=6):
    """One BDF2 step of c_t + u . grad c - eps lap c = 0.

    Weak form with the scalar-space Dirichlet constraints of ``dofmap``
    (zero at inflow in the channel problems) and natural conditions
    elsewhere.  Pass ``c_prev2=None`` for the startup step, which falls
    back to backward Euler.

    Returns the scalar field at the new time level.
    """
    c_prev.check(dofmap)
    u.check(dofmap)
    if eps < 0:
        raise ValueError("diffusivity must be nonnegative")
    Ms = assemble_bilinear("mass", dofmap, quad_degree=quad_degree,
                           space="scalar")
    Ks = assemble_bilinear("stiffness", dofmap, quad_degree=quad_degree,
                           space="scalar")
    C = assemble_scalar_advection(u, dofmap, quad_degree=quad_degree)
    if c_prev2 is None:
        A = Ms / dt + C + eps * Ks
        b = Ms @ c_prev.coeffs / dt
    else:
        c_prev2.check(dofmap)
        A = 1.5 * Ms / dt + C + eps * Ks
        b = Ms @ (2.0 * c_prev.coeffs - 0.5 * c_prev2.coeffs) / dt
    red = dofmap.reduction("scalar")
    A = A.tocsr()
    x = Factorization(red.reduce_matrix(A)).solve(red.reduce_rhs(b, A=A))
    return FeField("scalar", red.expand(x))


def scalar_mass(c, dofmap, quad_degree=6):
    """Total integral of a scalar field."""
    tab = tabulate(dofmap.mesh, quad_degree)
    vals, _ = scalar_values(tab, c)
    return float(np.einsum("eq,eq->", tab.W, vals))
