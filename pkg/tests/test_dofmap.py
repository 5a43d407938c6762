"""Degree-of-freedom layout, constraints, and system reduction."""

import numpy as np
import pytest

from nsfem.assemble import assemble_bilinear, assemble_load, mean_vector
from nsfem.dofmap import (ConstraintError, VelocityBC, apply_constraints,
                          build_taylor_hood)
from nsfem.linsolve import sparse_solve
from nsfem.mesh import build_periodic_map, build_rect_mesh


def test_smallest_mesh_dof_counts():
    m = build_rect_mesh(1, 1)
    dm = build_taylor_hood(m)
    assert dm.n_velocity_dofs == 2 * (4 + 5) == 18
    assert dm.n_pressure_dofs == 4


def test_raw_counts_general():
    m = build_rect_mesh(5, 3)
    dm = build_taylor_hood(m, bc={})
    assert dm.n_velocity_dofs == 2 * (m.n_vertices + m.n_edges)
    assert dm.n_scalar_dofs == m.n_vertices + m.n_edges
    # no constraints: free dof count equals raw count
    assert dm.reduction("velocity").n_free == dm.n_velocity_dofs


def test_fully_periodic_pressure_dimension():
    m = build_rect_mesh(4, 4).retag_boundary(
        {"xmin": "periodic_x", "xmax": "periodic_x",
         "ymin": "periodic_y", "ymax": "periodic_y"})
    pmap = build_periodic_map(m, ("x", "y"))
    dm = build_taylor_hood(m, bc={}, periodic=pmap)
    # identification classes on the torus: 4x4 vertices, minus the mean
    assert dm.reduction("pressure").n_free == 16
    assert dm.n_free("pressure") == 15
    assert dm.reduction("velocity").n_free == 2 * (16 + 3 * 16)


def test_noslip_constrains_boundary_nodes_including_midpoints():
    m = build_rect_mesh(4, 4)
    dm = build_taylor_hood(m)
    red = dm.reduction("velocity")
    n_bnodes = len(m.boundary_vertices()) + len(m.boundary_edges)
    assert red.n_free == dm.n_velocity_dofs - 2 * n_bnodes
    x = red.expand(np.random.default_rng(0).standard_normal(red.n_free))
    bnodes = np.concatenate([m.boundary_vertices(),
                             m.n_vertices + m.boundary_edges])
    assert np.all(x[2 * bnodes] == 0.0)
    assert np.all(x[2 * bnodes + 1] == 0.0)


def test_periodic_slaves_match_masters_after_expand():
    m = build_rect_mesh(4, 4).retag_boundary(
        {"xmin": "periodic_x", "xmax": "periodic_x"})
    pmap = build_periodic_map(m, ("x",))
    dm = build_taylor_hood(m, bc={}, periodic=pmap)
    red = dm.reduction("velocity")
    x = red.expand(np.random.default_rng(1).standard_normal(red.n_free))
    for mast, slav, _ in pmap.vertex_pairs:
        assert x[2 * slav] == x[2 * mast]
        assert x[2 * slav + 1] == x[2 * mast + 1]


def test_conflicting_dirichlet_values_rejected():
    m = build_rect_mesh(2, 2).retag_boundary({"xmin": "inflow"})
    bc = {"wall": VelocityBC("value", (1.0, 0.0)),
          "inflow": VelocityBC("value", (2.0, 0.0))}
    # the shared corner dofs get both values
    with pytest.raises(ConstraintError, match="conflicting"):
        build_taylor_hood(m, bc=bc)


def test_unknown_tag_rejected():
    m = build_rect_mesh(2, 2)
    with pytest.raises(ConstraintError, match="not present"):
        build_taylor_hood(m, bc={"inflow": VelocityBC("noslip")})


def test_normal_bc_constrains_one_component():
    m = build_rect_mesh(3, 3)
    dm = build_taylor_hood(m, bc={"wall": VelocityBC("normal")})
    red = dm.reduction("velocity")
    x = red.expand(np.random.default_rng(2).standard_normal(red.n_free))
    # x-component vanishes on vertical faces, y-component on horizontal
    for e in map(int, m.boundary_edges):
        face = m.boundary_edge_face(e)
        nodes = [m.edges[e, 0], m.edges[e, 1], m.n_vertices + e]
        comp = 0 if face in ("xmin", "xmax") else 1
        for n in nodes:
            assert x[2 * n + comp] == 0.0
    # corners have both components constrained, so count free dofs
    nb_v = len(m.boundary_vertices())
    nb_e = len(m.boundary_edges)
    corners = 4
    assert red.n_free == dm.n_velocity_dofs - (nb_v + nb_e + corners)


def test_all_dirichlet_problem_reduces_to_zero_unknowns():
    m = build_rect_mesh(1, 1)
    dm = build_taylor_hood(m)
    # pin the one interior node (the diagonal midpoint) as well, so the
    # problem is all-Dirichlet
    for node in range(dm.n_nodes):
        dm.u_dirichlet.setdefault(2 * node, 0.0)
        dm.u_dirichlet.setdefault(2 * node + 1, 0.0)
    A = assemble_bilinear("mass", dm)
    A_red, b_red, expand = apply_constraints(
        A, np.zeros(dm.n_velocity_dofs), dm, "velocity")
    assert A_red.shape == (0, 0)
    assert np.all(expand(np.zeros(0)) == 0.0)


def test_reduction_preserves_symmetry():
    m = build_rect_mesh(4, 4)
    dm = build_taylor_hood(m)
    K = assemble_bilinear("stiffness", dm)
    K_red, _, _ = apply_constraints(K, np.zeros(K.shape[0]), dm, "velocity")
    d = (K_red - K_red.T).toarray()
    assert np.abs(d).max() < 1e-14


def test_zero_mean_pressure_poisson():
    # pure Neumann Poisson with the multiplier row: mean of p vanishes
    m = build_rect_mesh(6, 6)
    dm = build_taylor_hood(m)
    Kp = assemble_bilinear("stiffness", dm, space="pressure")
    f = assemble_load(dm, lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y),
                      space="pressure")
    mvec = mean_vector(dm)
    A_red, b_red, expand = apply_constraints(Kp, f, dm, "pressure",
                                             zero_mean=True, mean_vector=mvec)
    p = expand(sparse_solve(A_red, b_red))
    norm = np.linalg.norm(p)
    assert abs(mvec @ p) <= 1e-12 * max(norm, 1.0)


def test_dirichlet_lift_solves_laplace_exactly():
    # scalar Laplace with linear boundary data reproduces the linear field
    m = build_rect_mesh(5, 5)
    dm = build_taylor_hood(m, bc={}, scalar_bc={"wall": lambda x, y: 2 * x - y})
    K = assemble_bilinear("stiffness", dm, space="scalar")
    A_red, b_red, expand = apply_constraints(
        K, np.zeros(dm.n_scalar_dofs), dm, "scalar")
    c = expand(sparse_solve(A_red, b_red))
    xy = dm.node_coords()
    assert np.abs(c - (2 * xy[:, 0] - xy[:, 1])).max() < 1e-10
