"""Numerical quadrature on the reference triangle."""

import numpy as np
from dataclasses import dataclass, field
from scipy.special import roots_legendre

# Reference triangle: vertices (0,0), (1,0), (0,1); area 1/2.
REF_AREA = 0.5


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points (barycentric) and weights on the reference triangle.

    ``points[k] = (l0, l1, l2)`` sums to one; ``weights`` sum to the
    reference area 1/2.  ``degree`` is the largest polynomial degree the
    rule integrates exactly.
    """

    degree: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be (n, 3) barycentric coordinates")
        if wts.shape != (pts.shape[0],):
            raise ValueError("weights/points length mismatch")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def xy(self):
        """Reference (x, y) coordinates of the quadrature points."""
        return self.points[:, 1:3].copy()


def _collapsed_gauss(degree):
    """Tensor Gauss-Legendre rule collapsed onto the triangle (Duffy map).

    x = a, y = b (1 - a) with a, b Gauss points on (0, 1).  The Jacobian
    factor (1 - a) raises the polynomial degree in a by one, hence the
    extra point in that direction.
    """
    na = (degree + 2) // 2 + 1
    nb = (degree + 1) // 2 + 1
    xa, wa = roots_legendre(na)
    xb, wb = roots_legendre(nb)
    # map from (-1, 1) to (0, 1)
    xa = 0.5 * (xa + 1.0)
    wa = 0.5 * wa
    xb = 0.5 * (xb + 1.0)
    wb = 0.5 * wb
    A, B = np.meshgrid(xa, xb, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    w = (WA * WB * (1.0 - A)).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return pts, w


# Symmetric 12-point rule, exact through degree 6 (weights scaled to sum to
# the reference area).  Used as the default operator rule; its exactness is
# asserted by the test suite against monomials.
_SYM6_GROUPS = [
    # (weight, barycentric generator, orbit size)
    (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
    (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
    (0.082851075618374, (0.636502499121399, 0.310352451033785, 0.053145049844816)),
]


def _symmetric_degree6():
    pts = []
    wts = []
    for w, gen in _SYM6_GROUPS:
        a, b, c = gen
        if abs(b - c) < 1e-14:
            orbit = {(a, b, c), (b, a, c), (b, c, a)}
        else:
            orbit = {
                (a, b, c), (a, c, b), (b, a, c),
                (b, c, a), (c, a, b), (c, b, a),
            }
        for p in sorted(orbit):
            pts.append(p)
            wts.append(w)
    pts = np.array(pts)
    wts = np.array(wts) * REF_AREA
    return pts, wts


def triangle_rule(degree):
    """Return a QuadratureRule exact for polynomials up to ``degree``.

    Degree 6 uses a symmetric 12-point rule; other degrees fall back to a
    collapsed Gauss construction, which is exact by construction for any
    requested degree.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    if degree == 6:
        pts, wts = _symmetric_degree6()
    else:
        pts, wts = _collapsed_gauss(degree)
    return QuadratureRule(degree=degree, points=pts, weights=wts)


def integrate_reference(rule, func):
    """Integrate ``func(x, y)`` over the reference triangle with ``rule``."""
    xy = rule.xy
    vals = func(xy[:, 0], xy[:, 1])
    return float(np.dot(rule.weights, vals))
