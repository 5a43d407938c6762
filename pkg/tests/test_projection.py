"""L2 / divergence-free projections and the Stokes initializer."""

import numpy as np

from nsfem.assemble import assemble_bilinear
from nsfem.diagnostics import compute_errors, l2_norm
from nsfem.dofmap import VelocityBC, build_taylor_hood
from nsfem.mesh import build_periodic_map, build_rect_mesh
from nsfem.projection import project_divfree, project_l2, solve_stokes


def _torus_dofmap(nx):
    m = build_rect_mesh(nx, nx).retag_boundary(
        {"xmin": "periodic_x", "xmax": "periodic_x",
         "ymin": "periodic_y", "ymax": "periodic_y"})
    return build_taylor_hood(m, bc={}, periodic=build_periodic_map(m, ("x", "y")))


def test_l2_projection_reproduces_polynomials():
    dm = build_taylor_hood(build_rect_mesh(4, 4), bc={})
    p = project_l2(dm, "pressure", lambda x, y: 1.0 + 2.0 * x - y)
    verts = dm.mesh.vertices
    assert np.abs(p.coeffs - (1.0 + 2.0 * verts[:, 0] - verts[:, 1])).max() < 1e-11


def test_divfree_projection_is_discretely_divergence_free():
    dm = _torus_dofmap(8)
    u = project_divfree(dm, lambda x, y: (np.sin(2 * np.pi * y), np.cos(2 * np.pi * x)))
    B = assemble_bilinear("divergence", dm)
    # test against the folded pressure basis (slave rows only carry half
    # of a periodic hat function)
    weak_div = np.abs(dm.reduction("pressure").R.T @ (B @ u.coeffs)).max()
    assert weak_div < 1e-11 * max(l2_norm(u, dm), 1.0)


def test_divfree_projection_keeps_divfree_data():
    # analytically divergence-free smooth data: the projection stays close
    # to the plain interpolant
    dm = _torus_dofmap(16)
    f = lambda x, y: (np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y),
                      np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y))
    u = project_divfree(dm, f)
    l2, _ = compute_errors(u, f, None, dm)
    assert l2 < 5e-3  # interpolation-scale error at h = 1/16


def test_stokes_channel_flow_matches_poiseuille():
    # unit-height channel with parabolic inflow: the Stokes solution is the
    # same parabolic profile everywhere (Poiseuille flow)
    m = build_rect_mesh(12, 6, box=(0.0, 2.0, 0.0, 1.0)).retag_boundary(
        {"xmin": "inflow", "xmax": "outflow"})
    bc = {"wall": VelocityBC("noslip"),
          "inflow": VelocityBC("value", lambda x, y: (4.0 * y * (1.0 - y), 0.0)),
          "outflow": VelocityBC("none")}
    dm = build_taylor_hood(m, bc=bc)
    u, p = solve_stokes(dm, nu=0.1)
    exact = lambda x, y: (4.0 * y * (1.0 - y), np.zeros_like(x))
    l2, _ = compute_errors(u, exact, None, dm)
    assert l2 < 1e-9  # parabola is in the quadratic space
    # discretely divergence-free; pressure pinned by the do-nothing
    # outflow (no zero-mean multiplier), linear in x
    assert not dm.pressure_zero_mean
    B = assemble_bilinear("divergence", dm)
    assert np.abs(B @ u.coeffs).max() < 1e-9
    verts = dm.mesh.vertices
    p_exact = 8.0 * 0.1 * (2.0 - verts[:, 0])
    assert np.abs(p.coeffs - p_exact).max() < 1e-8
