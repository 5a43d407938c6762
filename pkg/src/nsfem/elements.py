"""Lagrange basis tabulation on the reference triangle (P1 and P2)."""

import numpy as np

# Local node conventions on a triangle (v0, v1, v2):
#   P1: nodes at the three vertices.
#   P2: vertex nodes 0..2, then midside nodes 3..5 where node 3+i sits on
#       the edge opposite vertex i, i.e. edges (v1,v2), (v2,v0), (v0,v1).
P1_DOFS = 3
P2_DOFS = 6


def p1_values(xy):
    """P1 basis values at reference points ``xy`` of shape (n, 2)."""
    x, y = xy[:, 0], xy[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


def p1_grads(n_points):
    """Reference gradients of the P1 basis, constant per basis function."""
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.broadcast_to(g, (n_points, 3, 2)).copy()


def p2_values(xy):
    """P2 basis values at reference points ``xy`` of shape (n, 2)."""
    x, y = xy[:, 0], xy[:, 1]
    l0 = 1.0 - x - y
    l1 = x
    l2 = y
    return np.column_stack([
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l0,
        4.0 * l0 * l1,
    ])


def p2_grads(xy):
    """Reference gradients of the P2 basis at points ``xy``, shape (n, 6, 2)."""
    x, y = xy[:, 0], xy[:, 1]
    l0 = 1.0 - x - y
    l1 = x
    l2 = y
    n = xy.shape[0]
    g = np.zeros((n, 6, 2))
    # d/dx with dl0/dx = -1, dl1/dx = 1, dl2/dx = 0 (and symmetric for y)
    g[:, 0, 0] = -(4.0 * l0 - 1.0)
    g[:, 0, 1] = -(4.0 * l0 - 1.0)
    g[:, 1, 0] = 4.0 * l1 - 1.0
    g[:, 2, 1] = 4.0 * l2 - 1.0
    g[:, 3, 0] = 4.0 * l2
    g[:, 3, 1] = 4.0 * l1
    g[:, 4, 0] = -4.0 * l2
    g[:, 4, 1] = 4.0 * (l0 - l2)
    g[:, 5, 0] = 4.0 * (l0 - l1)
    g[:, 5, 1] = -4.0 * l1
    return g
