"""Assembly of bilinear and trilinear variational forms.

All assembly is vectorized over elements with a fixed quadrature rule and
deterministic scatter into compressed sparse row matrices (duplicate
entries are summed in index order), so repeated runs produce bit-identical
operators.

Velocity/pressure conventions:
  mass        (u, v) on the vector quadratic space
  stiffness   (grad u, grad v)
  divergence  B with B[q, v] = (div v, q), pressure rows by velocity cols
  grad_div    (div u, div v)

Convection forms on a linearization state ``w``:
  emac  (N(w) v, chi) = (2 D(w) v, chi) + ((div w) v, chi)
  skew  (N(w) v, chi) = (w . grad v, chi) + ((div w) v, chi) / 2
  conv  (N(w) v, chi) = (w . grad v, chi)
with D the symmetric gradient.  ``jacobian_pair`` additionally returns the
second-slot derivative block M(w) with (M(w) d, chi) = form(d, w, chi),
which is what a Newton linearization of form(u, u, chi) needs.
"""

import numpy as np
import scipy.sparse as sp

from .elements import p1_values, p1_grads, p2_values, p2_grads
from .quadrature import triangle_rule

CONVECTION_FORMS = ("emac", "skew", "conv")
DEFAULT_DEGREE = 6


class Tabulation:
    """Per-(mesh, rule) geometry and basis tables used by all assembly."""

    def __init__(self, mesh, rule):
        self.mesh = mesh
        self.rule = rule
        tris = mesh.triangles
        p0 = mesh.vertices[tris[:, 0]]
        p1 = mesh.vertices[tris[:, 1]]
        p2 = mesh.vertices[tris[:, 2]]
        J = np.empty((mesh.n_triangles, 2, 2))
        J[:, :, 0] = p1 - p0
        J[:, :, 1] = p2 - p0
        detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        inv[:, 1, 1] = J[:, 0, 0]
        inv /= detJ[:, None, None]
        self.detJ = detJ

        xy = rule.xy
        self.N2 = p2_values(xy)
        self.N1 = p1_values(xy)
        g2 = p2_grads(xy)
        g1 = p1_grads(xy.shape[0])
        # physical gradients: d phi / dx_a = dref phi_k * Jinv[k, a]
        self.G2 = np.einsum("qik,ekd->eqid", g2, inv, optimize=True)
        self.G1 = np.einsum("qik,ekd->eqid", g1, inv, optimize=True)
        # combined quadrature weight per element and point
        self.W = detJ[:, None] * rule.weights[None, :]
        # physical coordinates of quadrature points
        self.xq = (p0[:, None, :]
                   + np.einsum("eab,qb->eqa", J, xy))

        V = mesh.n_vertices
        enodes = V + mesh.tri_edges
        nodes = np.hstack([tris, enodes])         # (T, 6)
        self.enodes_s = nodes
        edv = np.empty((mesh.n_triangles, 12), dtype=np.int64)
        edv[:, 0::2] = 2 * nodes
        edv[:, 1::2] = 2 * nodes + 1
        self.edofs_v = edv
        self.edofs_p = tris.copy()


def tabulate(mesh, degree=DEFAULT_DEGREE):
    """Tabulation for a mesh at a quadrature degree, cached on the mesh."""
    key = ("tabulation", degree)
    if key not in mesh._cache:
        mesh._cache[key] = Tabulation(mesh, triangle_rule(degree))
    return mesh._cache[key]


def _scatter(loc, rows, cols, shape):
    T, a, b = loc.shape
    r = np.broadcast_to(rows[:, :, None], (T, a, b)).ravel()
    c = np.broadcast_to(cols[:, None, :], (T, a, b)).ravel()
    A = sp.coo_matrix((loc.ravel(), (r, c)), shape=shape).tocsr()
    A.sort_indices()
    return A


def _expand_identity(base):
    """Lift a scalar-block local matrix to both velocity components."""
    T, a, b = base.shape
    loc = np.zeros((T, 2 * a, 2 * b))
    loc[:, 0::2, 0::2] = base
    loc[:, 1::2, 1::2] = base
    return loc


def velocity_values(tab, u):
    """Velocity and velocity gradient at quadrature points.

    Returns (u_q, grad_q) with shapes (T, Q, 2) and (T, Q, 2, 2) where
    grad_q[..., a, b] = d u_a / d x_b.
    """
    ul = u.coeffs[tab.edofs_v].reshape(-1, 6, 2)
    u_q = np.einsum("qi,eia->eqa", tab.N2, ul)
    grad_q = np.einsum("eqib,eia->eqab", tab.G2, ul)
    return u_q, grad_q


def scalar_values(tab, c):
    cl = c.coeffs[tab.enodes_s]
    vals = np.einsum("qi,ei->eq", tab.N2, cl)
    grads = np.einsum("eqib,ei->eqb", tab.G2, cl)
    return vals, grads


def pressure_values(tab, p):
    pl = p.coeffs[tab.edofs_p]
    vals = np.einsum("qi,ei->eq", tab.N1, pl)
    grads = np.einsum("eqib,ei->eqb", tab.G1, pl)
    return vals, grads


def assemble_bilinear(kind, dofmap, quad_degree=DEFAULT_DEGREE, space="velocity"):
    """Assemble one of the standard bilinear forms as a CSR matrix.

    ``kind`` is one of mass | stiffness | divergence | grad_div.  The
    velocity space is the default; mass and stiffness are also available
    on the pressure and scalar spaces.
    """
    if quad_degree < 4 and space != "pressure":
        raise ValueError(
            "quadratic-space products need quadrature degree >= 4")
    tab = tabulate(dofmap.mesh, quad_degree)
    W = tab.W
    n_u = dofmap.n_velocity_dofs
    n_p = dofmap.n_pressure_dofs
    n_s = dofmap.n_scalar_dofs

    if space == "velocity":
        if kind == "mass":
            base = np.einsum("eq,qi,qj->eij", W, tab.N2, tab.N2, optimize=True)
            return _scatter(_expand_identity(base), tab.edofs_v, tab.edofs_v,
                            (n_u, n_u))
        if kind == "stiffness":
            base = np.einsum("eq,eqid,eqjd->eij", W, tab.G2, tab.G2, optimize=True)
            return _scatter(_expand_identity(base), tab.edofs_v, tab.edofs_v,
                            (n_u, n_u))
        if kind == "grad_div":
            loc = np.einsum("eq,eqia,eqjb->eiajb", W, tab.G2, tab.G2, optimize=True)
            loc = loc.reshape(-1, 12, 12)
            return _scatter(loc, tab.edofs_v, tab.edofs_v, (n_u, n_u))
        if kind == "divergence":
            loc = np.einsum("eq,qk,eqjb->ekjb", W, tab.N1, tab.G2, optimize=True)
            loc = loc.reshape(-1, 3, 12)
            return _scatter(loc, tab.edofs_p, tab.edofs_v, (n_p, n_u))
        raise ValueError(f"unknown velocity form kind {kind!r}")

    if space == "pressure":
        if kind == "mass":
            loc = np.einsum("eq,qk,ql->ekl", W, tab.N1, tab.N1, optimize=True)
        elif kind == "stiffness":
            loc = np.einsum("eq,eqkd,eqld->ekl", W, tab.G1, tab.G1, optimize=True)
        else:
            raise ValueError(f"unknown pressure form kind {kind!r}")
        return _scatter(loc, tab.edofs_p, tab.edofs_p, (n_p, n_p))

    if space == "scalar":
        if kind == "mass":
            loc = np.einsum("eq,qi,qj->eij", W, tab.N2, tab.N2, optimize=True)
        elif kind == "stiffness":
            loc = np.einsum("eq,eqid,eqjd->eij", W, tab.G2, tab.G2, optimize=True)
        else:
            raise ValueError(f"unknown scalar form kind {kind!r}")
        return _scatter(loc, tab.enodes_s, tab.enodes_s, (n_s, n_s))

    raise ValueError(f"unknown space {space!r}")


def assemble_convection(form, u_lin, mode, dofmap, quad_degree=DEFAULT_DEGREE):
    """Convection operator (and optionally its Newton pair) at ``u_lin``.

    mode "operator" returns N(u_lin); mode "jacobian_pair" returns
    (N(u_lin), M(u_lin)) where M is the second-slot derivative block, so
    the Jacobian of u -> N(u) u is N(u) + M(u).
    """
    if form not in CONVECTION_FORMS:
        raise ValueError(f"unknown convection form {form!r}; "
                         f"choose from {CONVECTION_FORMS}")
    if mode not in ("operator", "jacobian_pair"):
        raise ValueError(f"unknown mode {mode!r}")
    if u_lin.space != "velocity":
        raise ValueError("convection linearization state must be a velocity field")
    u_lin.check(dofmap)

    tab = tabulate(dofmap.mesh, quad_degree)
    W, N, G = tab.W, tab.N2, tab.G2
    n_u = dofmap.n_velocity_dofs
    u_q, grad_q = velocity_values(tab, u_lin)
    div_q = grad_q[:, :, 0, 0] + grad_q[:, :, 1, 1]
    # u . grad phi_j at each point
    adv = np.einsum("eqjc,eqc->eqj", G, u_q, optimize=True)

    if form == "emac":
        C = grad_q + grad_q.transpose(0, 1, 3, 2)
        C[:, :, 0, 0] += div_q
        C[:, :, 1, 1] += div_q
        loc = np.einsum("eq,qi,qj,eqab->eiajb", W, N, N, C, optimize=True).reshape(-1, 12, 12)
    elif form == "skew":
        t = adv + 0.5 * div_q[:, :, None] * N[None, :, :]
        loc = _expand_identity(np.einsum("eq,qi,eqj->eij", W, N, t, optimize=True))
    else:
        loc = _expand_identity(np.einsum("eq,qi,eqj->eij", W, N, adv, optimize=True))

    Nmat = _scatter(loc, tab.edofs_v, tab.edofs_v, (n_u, n_u))
    if mode == "operator":
        return Nmat

    if form == "emac":
        d1 = _expand_identity(np.einsum("eq,qi,eqj->eij", W, N, adv, optimize=True))
        d2 = np.einsum("eq,qi,eqja,eqb->eiajb", W, N, G, u_q, optimize=True)
        d3 = np.einsum("eq,qi,eqjb,eqa->eiajb", W, N, G, u_q, optimize=True)
        locM = d1 + (d2 + d3).reshape(-1, 12, 12)
    elif form == "skew":
        d1 = np.einsum("eq,qi,qj,eqab->eiajb", W, N, N, grad_q, optimize=True)
        d2 = 0.5 * np.einsum("eq,qi,eqjb,eqa->eiajb", W, N, G, u_q, optimize=True)
        locM = (d1 + d2).reshape(-1, 12, 12)
    else:
        locM = np.einsum("eq,qi,qj,eqab->eiajb", W, N, N,
                         grad_q, optimize=True).reshape(-1, 12, 12)
    Mmat = _scatter(locM, tab.edofs_v, tab.edofs_v, (n_u, n_u))
    return Nmat, Mmat


def assemble_scalar_advection(u, dofmap, quad_degree=DEFAULT_DEGREE):
    """(u . grad c, q) on the scalar quadratic space."""
    u.check(dofmap)
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, _ = velocity_values(tab, u)
    adv = np.einsum("eqjc,eqc->eqj", tab.G2, u_q, optimize=True)
    loc = np.einsum("eq,qi,eqj->eij", tab.W, tab.N2, adv, optimize=True)
    n_s = dofmap.n_scalar_dofs
    return _scatter(loc, tab.enodes_s, tab.enodes_s, (n_s, n_s))


def _values_at_points(func, xq, ncomp):
    x = xq[..., 0].ravel()
    y = xq[..., 1].ravel()
    vals = func(x, y)
    if ncomp == 1:
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               x.shape).reshape(xq.shape[:2])
    out = np.empty(xq.shape[:2] + (2,))
    out[..., 0] = np.broadcast_to(vals[0], x.shape).reshape(xq.shape[:2])
    out[..., 1] = np.broadcast_to(vals[1], x.shape).reshape(xq.shape[:2])
    return out


def assemble_load(dofmap, func, space="velocity", quad_degree=DEFAULT_DEGREE):
    """Load vector (f, basis) for a closure ``func(x, y)``."""
    tab = tabulate(dofmap.mesh, quad_degree)
    if space == "velocity":
        fq = _values_at_points(func, tab.xq, 2)
        loc = np.einsum("eq,qi,eqa->eia", tab.W, tab.N2, fq, optimize=True).reshape(-1, 12)
        out = np.zeros(dofmap.n_velocity_dofs)
        np.add.at(out, tab.edofs_v.ravel(), loc.ravel())
        return out
    if space == "pressure":
        fq = _values_at_points(func, tab.xq, 1)
        loc = np.einsum("eq,qk,eq->ek", tab.W, tab.N1, fq, optimize=True)
        out = np.zeros(dofmap.n_pressure_dofs)
        np.add.at(out, tab.edofs_p.ravel(), loc.ravel())
        return out
    if space == "scalar":
        fq = _values_at_points(func, tab.xq, 1)
        loc = np.einsum("eq,qi,eq->ei", tab.W, tab.N2, fq, optimize=True)
        out = np.zeros(dofmap.n_scalar_dofs)
        np.add.at(out, tab.enodes_s.ravel(), loc.ravel())
        return out
    raise ValueError(f"unknown space {space!r}")


def mean_vector(dofmap, quad_degree=DEFAULT_DEGREE):
    """Pressure-space load of the constant 1, i.e. integrals of the basis."""
    return assemble_load(dofmap, lambda x, y: np.ones_like(x),
                         space="pressure", quad_degree=quad_degree)


def convection_functional(form, u, v, w, dofmap, quad_degree=DEFAULT_DEGREE):
    """Evaluate the trilinear form form(u, v, w) by direct quadrature."""
    tab = tabulate(dofmap.mesh, quad_degree)
    u_q, gu = velocity_values(tab, u)
    v_q, gv = velocity_values(tab, v)
    w_q, _ = velocity_values(tab, w)
    div_u = gu[:, :, 0, 0] + gu[:, :, 1, 1]
    if form == "emac":
        Dv = np.einsum("eqab,eqb->eqa", gu + gu.transpose(0, 1, 3, 2), v_q)
        integrand = np.einsum("eqa,eqa->eq", Dv, w_q) \
            + div_u * np.einsum("eqa,eqa->eq", v_q, w_q)
    elif form == "skew":
        adv = np.einsum("eqab,eqb->eqa", gv, u_q)
        integrand = np.einsum("eqa,eqa->eq", adv, w_q) \
            + 0.5 * div_u * np.einsum("eqa,eqa->eq", v_q, w_q)
    elif form == "conv":
        adv = np.einsum("eqab,eqb->eqa", gv, u_q)
        integrand = np.einsum("eqa,eqa->eq", adv, w_q)
    else:
        raise ValueError(f"unknown convection form {form!r}")
    return float(np.einsum("eq,eq->", tab.W, integrand))
