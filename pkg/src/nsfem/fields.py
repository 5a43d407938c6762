"""Discrete field containers and nodal interpolation."""

import numpy as np
from dataclasses import dataclass, field

from .dofmap import SPACES


@dataclass
class FeField:
    """Coefficient vector of a discrete field, tagged with its space."""

    space: str
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown space {self.space!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    def check(self, dofmap):
        n = dofmap.n_dofs(self.space)
        if self.coeffs.shape != (n,):
            raise ValueError(
                f"{self.space} field has {self.coeffs.shape} coefficients, "
                f"expected ({n},)")
        return self

    def copy(self):
        return FeField(self.space, self.coeffs.copy())


def zero_field(dofmap, space):
    return FeField(space, np.zeros(dofmap.n_dofs(space)))


def interpolate(dofmap, space, func):
    """Nodal interpolation of a closure onto a discrete space.

    ``func(x, y)`` returns a scalar for pressure/scalar spaces and a pair
    for the velocity space.  x and y may be passed as arrays.
    """
    if space == "pressure":
        xy = dofmap.mesh.vertices
    else:
        xy = dofmap.node_coords()
    vals = func(xy[:, 0], xy[:, 1])
    if space == "velocity":
        u, v = vals
        coeffs = np.empty(2 * xy.shape[0])
        coeffs[0::2] = np.broadcast_to(u, (xy.shape[0],))
        coeffs[1::2] = np.broadcast_to(v, (xy.shape[0],))
    else:
        coeffs = np.broadcast_to(np.asarray(vals, dtype=float),
                                 (xy.shape[0],)).copy()
    return FeField(space, coeffs).check(dofmap)


def velocity_components(field):
    """Views of the x/y coefficient sub-vectors of a velocity field."""
    return field.coeffs[0::2], field.coeffs[1::2]
