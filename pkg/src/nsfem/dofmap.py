"""Taylor-Hood degree-of-freedom layout and constraint reduction.

Velocity is vector-valued quadratic Lagrange (nodes at vertices and edge
midpoints, two components each, dof = 2*node + component), pressure is
scalar linear Lagrange on vertices, and an auxiliary scalar quadratic
space shares the velocity nodes.  Constraints (Dirichlet values, periodic
master/slave identification, pressure zero mean) are applied by exact
elimination: reduced systems act on representative free dofs only, and a
prolongation expands reduced solutions back to full coefficient vectors.
"""

import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass

from .mesh import WALL, PERIODIC_X, PERIODIC_Y

SPACES = ("velocity", "pressure", "scalar")


class ConstraintError(Exception):
    """Raised for conflicting or ill-posed constraint specifications."""


@dataclass
class VelocityBC:
    """Boundary condition for one boundary tag.

    kind:
      "noslip"  both components fixed to zero
      "value"   both components fixed to ``value`` (tuple or callable(x, y))
      "normal"  only the face-normal component fixed (to 0, or to the
                normal component of ``value``); tangential left free
      "none"    natural/do-nothing
    """

    kind: str
    value: object = None

    def __post_init__(self):
        if self.kind not in ("noslip", "value", "normal", "none"):
            raise ConstraintError(f"unknown velocity BC kind {self.kind!r}")


NOSLIP = VelocityBC("noslip")
SLIP = VelocityBC("normal")
FREE = VelocityBC("none")


class Reduction:
    """Prolongation from reduced (free) dofs to a full coefficient vector.

    full = R @ reduced + g, where g carries Dirichlet values.  Slave dofs
    of periodic constraints point at their master's column of R, so
    expanded vectors satisfy slave == master exactly.
    """

    def __init__(self, n_full, rep, dirichlet_value):
        self.n_full = n_full
        self.rep = rep
        is_dir = np.zeros(n_full, dtype=bool)
        g_rep = np.zeros(n_full)
        for dof, val in dirichlet_value.items():
            is_dir[dof] = True
            g_rep[dof] = val
        reps = np.unique(rep)
        self.free = np.array([r for r in reps if not is_dir[r]], dtype=np.int64)
        self.n_free = len(self.free)
        col_of = -np.ones(n_full, dtype=np.int64)
        col_of[self.free] = np.arange(self.n_free)

        rows, cols = [], []
        g = np.zeros(n_full)
        for dof in range(n_full):
            r = rep[dof]
            if is_dir[r]:
                g[dof] = g_rep[r]
            else:
                rows.append(dof)
                cols.append(col_of[r])
        data = np.ones(len(rows))
        self.R = sp.csr_matrix((data, (rows, cols)), shape=(n_full, self.n_free))
        self.g = g
        self.has_lift = bool(np.any(g != 0.0))

    def expand(self, x_red):
        return self.R @ x_red + self.g

    def reduce_matrix(self, A):
        out = (self.R.T @ A @ self.R).tocsr()
        out.sort_indices()
        return out

    def reduce_rhs(self, b, A=None):
        if self.has_lift:
            if A is None:
                raise ValueError("need the full matrix to lift Dirichlet values")
            b = b - A @ self.g
        return self.R.T @ b

    def restrict(self, x_full):
        """Values of a full vector on the free representative dofs."""
        return x_full[self.free]


class DofMap:
    """Degree-of-freedom numbering and constraints for one mesh."""

    def __init__(self, mesh, node_rep, u_dirichlet, c_dirichlet,
                 pressure_zero_mean=True):
        self.mesh = mesh
        V, E = mesh.n_vertices, mesh.n_edges
        self.n_nodes = V + E
        self.node_rep = node_rep
        self.u_dirichlet = dict(u_dirichlet)
        self.c_dirichlet = dict(c_dirichlet)
        self.pressure_zero_mean = pressure_zero_mean
        self._reductions = {}

    # raw (pre-constraint) dof counts
    @property
    def n_velocity_dofs(self):
        return 2 * self.n_nodes

    @property
    def n_pressure_dofs(self):
        return self.mesh.n_vertices

    @property
    def n_scalar_dofs(self):
        return self.n_nodes

    def n_dofs(self, space):
        return {"velocity": self.n_velocity_dofs,
                "pressure": self.n_pressure_dofs,
                "scalar": self.n_scalar_dofs}[space]

    def node_coords(self):
        """Coordinates of the quadratic nodes (vertices then edge midpoints)."""
        return np.vstack([self.mesh.vertices, self.mesh.edge_midpoints()])

    def reduction(self, space):
        if space not in SPACES:
            raise ValueError(f"unknown space {space!r}")
        if space not in self._reductions:
            if space == "velocity":
                n = self.n_velocity_dofs
                rep = np.empty(n, dtype=np.int64)
                rep[0::2] = 2 * self.node_rep
                rep[1::2] = 2 * self.node_rep + 1
                dirichlet = self.u_dirichlet
            elif space == "scalar":
                n = self.n_scalar_dofs
                rep = self.node_rep.copy()
                dirichlet = self.c_dirichlet
            else:
                n = self.n_pressure_dofs
                rep = self.node_rep[:n].copy()
                dirichlet = {int(rep[v]): 0.0
                             for v in self._orphan_pressure_vertices()}
            self._reductions[space] = Reduction(n, rep, dirichlet)
        return self._reductions[space]

    def _orphan_pressure_vertices(self):
        """Pressure vertices whose whole velocity patch is constrained.

        Their continuity rows vanish identically after reduction (this
        happens inside pinned obstacle regions), so the pressure there is
        fixed to zero to keep saddle systems nonsingular.
        """
        mesh = self.mesh
        V = mesh.n_vertices
        dir_rep = np.zeros(self.n_velocity_dofs, dtype=bool)
        for d in self.u_dirichlet:
            dir_rep[d] = True
        node_fixed = np.empty(self.n_nodes, dtype=bool)
        for node in range(self.n_nodes):
            r = self.node_rep[node]
            node_fixed[node] = dir_rep[2 * r] and dir_rep[2 * r + 1]
        if not node_fixed.any():
            return []
        elem_fixed = np.ones(mesh.n_triangles, dtype=bool)
        for loc in range(3):
            elem_fixed &= node_fixed[mesh.triangles[:, loc]]
            elem_fixed &= node_fixed[V + mesh.tri_edges[:, loc]]
        vertex_free = np.zeros(V, dtype=bool)
        for t in np.flatnonzero(~elem_fixed):
            for v in mesh.triangles[t]:
                vertex_free[v] = True
        return [int(v) for v in np.flatnonzero(~vertex_free)]

    def n_free(self, space):
        """Dimension of the constrained subspace.

        For the pressure space with the zero-mean constraint active this
        is one less than the number of reduced unknowns (the mean is
        removed by a Lagrange multiplier at solve time).
        """
        n = self.reduction(space).n_free
        if space == "pressure" and self.pressure_zero_mean:
            n -= 1
        return n


def _node_union_find(mesh, periodic):
    """Representative node per quadratic node under periodic pairing."""
    V = mesh.n_vertices
    n = V + mesh.n_edges
    parent = np.arange(n, dtype=np.int64)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        lo, hi = (ra, rb) if ra < rb else (rb, ra)
        parent[hi] = lo

    if periodic is not None:
        for m, s, _axis in periodic.vertex_pairs:
            union(m, s)
        for m, s, _axis in periodic.edge_pairs:
            union(V + m, V + s)
    return np.array([find(i) for i in range(n)], dtype=np.int64)


def _bc_values_at(value, coords):
    if value is None:
        return np.zeros((coords.shape[0], 2))
    if callable(value):
        out = np.array([value(x, y) for x, y in coords], dtype=float)
        return out.reshape(coords.shape[0], 2)
    arr = np.asarray(value, dtype=float)
    return np.broadcast_to(arr, (coords.shape[0], 2)).copy()


def build_taylor_hood(mesh, bc=None, periodic=None, pressure_zero_mean=None,
                      scalar_bc=None):
    """Build the Taylor-Hood DofMap for a mesh.

    Parameters
    ----------
    mesh : Mesh
    bc : dict, optional
        Map from boundary tag to VelocityBC.  Defaults to no-slip on
        "wall"; periodic tags never carry Dirichlet data.
    periodic : PeriodicMap, optional
        Vertex/edge identification to fold into master dofs.
    pressure_zero_mean : bool, optional
        Record the zero-mean pressure constraint (applied at solve time
        through one Lagrange multiplier).  Defaults to automatic: active
        unless some boundary is natural (a do-nothing boundary pins the
        pressure level instead).
    scalar_bc : dict, optional
        Map from boundary tag to a Dirichlet value (number or callable)
        for the auxiliary scalar space; tags not listed are natural.

    Raises
    ------
    ConstraintError
        If a tag is missing from the mesh or two conditions assign
        conflicting values to one dof.
    """
    if bc is None:
        bc = {WALL: NOSLIP}
    if pressure_zero_mean is None:
        pressure_zero_mean = True
        for e in mesh.boundary_edges:
            tag = mesh.boundary_tags[int(e)]
            if tag in (PERIODIC_X, PERIODIC_Y):
                continue
            spec = bc.get(tag)
            if spec is None or spec.kind == "none":
                pressure_zero_mean = False
                break
    for tag in bc:
        if tag in (PERIODIC_X, PERIODIC_Y):
            raise ConstraintError(f"tag {tag!r} cannot carry Dirichlet data")
        if tag not in mesh.boundary_tags.values():
            raise ConstraintError(f"boundary tag {tag!r} not present in mesh")
    if scalar_bc:
        for tag in scalar_bc:
            if tag not in mesh.boundary_tags.values():
                raise ConstraintError(f"boundary tag {tag!r} not present in mesh")

    node_rep = _node_union_find(mesh, periodic)
    V = mesh.n_vertices
    node_xy = np.vstack([mesh.vertices, mesh.edge_midpoints()])

    u_dirichlet = {}
    c_dirichlet = {}

    def set_value(table, dof, val, what):
        r = int(node_rep[dof // 2] * 2 + dof % 2) if table is u_dirichlet \
            else int(node_rep[dof])
        if r in table and abs(table[r] - val) > 1e-12 + 1e-12 * abs(val):
            raise ConstraintError(
                f"conflicting {what} constraints on dof {r}: "
                f"{table[r]!r} vs {val!r}")
        table[r] = val

    for e in mesh.boundary_edges:
        e = int(e)
        tag = mesh.boundary_tags[e]
        nodes = [int(mesh.edges[e, 0]), int(mesh.edges[e, 1]), V + e]
        coords = node_xy[nodes]

        spec = bc.get(tag)
        if spec is not None and spec.kind != "none":
            if spec.kind == "noslip":
                vals = np.zeros((3, 2))
                comps = (0, 1)
            elif spec.kind == "value":
                vals = _bc_values_at(spec.value, coords)
                comps = (0, 1)
            else:  # normal
                face = mesh.boundary_edge_face(e)
                if face is None:
                    raise ConstraintError(
                        f"normal BC on edge {e} not on a rectangle face")
                comp = 0 if face in ("xmin", "xmax") else 1
                vals = _bc_values_at(spec.value, coords)
                comps = (comp,)
            for k, node in enumerate(nodes):
                for c in comps:
                    set_value(u_dirichlet, 2 * node + c, float(vals[k, c]),
                              "velocity")

        if scalar_bc and tag in scalar_bc:
            sval = scalar_bc[tag]
            for k, node in enumerate(nodes):
                v = sval(*coords[k]) if callable(sval) else float(sval)
                set_value(c_dirichlet, node, float(v), "scalar")

    return DofMap(mesh, node_rep, u_dirichlet, c_dirichlet,
                  pressure_zero_mean=pressure_zero_mean)


def apply_constraints(A, b, dofmap, space, zero_mean=None, mean_vector=None):
    """Reduce a single-space system by its constraints.

    Dirichlet rows and columns are eliminated with a value lift, periodic
    slaves fold into their masters, and (for the pressure space) the zero
    mean condition is enforced by appending one Lagrange multiplier
    row/column built from ``mean_vector`` (the load vector of 1).

    Returns (A_red, b_red, expand) where ``expand`` maps a reduced
    solution back to the full coefficient vector, dropping any
    multiplier.
    """
    red = dofmap.reduction(space)
    A_red = red.reduce_matrix(A)
    b_red = red.reduce_rhs(np.asarray(b, dtype=float), A=A)
    if zero_mean is None:
        zero_mean = space == "pressure" and dofmap.pressure_zero_mean
    if zero_mean:
        if mean_vector is None:
            raise ValueError("zero-mean reduction needs the mean vector")
        m = red.R.T @ np.asarray(mean_vector, dtype=float)
        A_red = bordered_system(A_red, m)
        b_red = np.concatenate([b_red, [0.0]])

        def expand(x):
            return red.expand(x[:-1])
    else:
        def expand(x):
            return red.expand(x)
    return A_red, b_red, expand


def bordered_system(A, m):
    """Append one Lagrange multiplier row/column to a square matrix."""
    n = A.shape[0]
    m = sp.csr_matrix(np.asarray(m, dtype=float).reshape(n, 1))
    out = sp.bmat([[A, m], [m.T, None]], format="csr")
    out.sort_indices()
    return out
