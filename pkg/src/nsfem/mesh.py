"""Conforming triangulations of rectangular domains.

Meshes are uniform triangulations of an axis-aligned box with tagged
boundary edges and optional periodic vertex/edge pairing.  A built Mesh is
immutable and safe to share between threads.
"""

import numpy as np
from dataclasses import dataclass, field

WALL = "wall"
PERIODIC_X = "periodic_x"
PERIODIC_Y = "periodic_y"
INFLOW = "inflow"
OUTFLOW = "outflow"

VALID_TAGS = (WALL, PERIODIC_X, PERIODIC_Y, INFLOW, OUTFLOW)

# Rectangle faces, used for retagging and normal-direction constraints.
FACES = ("xmin", "xmax", "ymin", "ymax")


class MeshError(Exception):
    """Raised for invalid mesh construction input."""


class Mesh:
    """Triangle mesh with derived edge connectivity.

    Parameters
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array
        Vertex index triples, counter-clockwise.
    domain_box : tuple
        (xmin, xmax, ymin, ymax) of the covered rectangle.
    boundary_tags : dict, optional
        Map from boundary edge id to tag; defaults to "wall" everywhere.
    """

    def __init__(self, vertices, triangles, domain_box=None, boundary_tags=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be (V, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be (T, 3)")
        if domain_box is None:
            xmin, ymin = self.vertices.min(axis=0)
            xmax, ymax = self.vertices.max(axis=0)
            domain_box = (xmin, xmax, ymin, ymax)
        self.domain_box = tuple(float(v) for v in domain_box)

        self._build_edges()
        if boundary_tags is None:
            boundary_tags = {int(e): WALL for e in self.boundary_edges}
        self.boundary_tags = dict(boundary_tags)
        self._cache = {}
        for arr in (self.vertices, self.triangles, self.edges,
                    self.tri_edges, self.edge_tris):
            arr.flags.writeable = False

    def _build_edges(self):
        tris = self.triangles
        # local edges opposite vertices 0, 1, 2
        pairs = np.concatenate([
            tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]],
        ])
        pairs_sorted = np.sort(pairs, axis=1)
        edges, inverse = np.unique(pairs_sorted, axis=0, return_inverse=True)
        self.edges = edges
        ntri = tris.shape[0]
        self.tri_edges = inverse.reshape(3, ntri).T.copy()

        counts = np.bincount(inverse, minlength=edges.shape[0])
        edge_tris = -np.ones((edges.shape[0], 2), dtype=np.int64)
        for loc in range(3):
            for t in range(ntri):
                e = self.tri_edges[t, loc]
                if edge_tris[e, 0] < 0:
                    edge_tris[e, 0] = t
                else:
                    edge_tris[e, 1] = t
        self.edge_tris = edge_tris
        self.edge_counts = counts
        self.boundary_edges = np.flatnonzero(counts == 1)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def h(self):
        """Mesh width: the maximum edge length."""
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.sqrt((d ** 2).sum(axis=1)).max())

    def signed_areas(self):
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))

    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def boundary_vertices(self):
        """Sorted ids of vertices lying on boundary edges."""
        if len(self.boundary_edges) == 0:
            return np.array([], dtype=np.int64)
        return np.unique(self.edges[self.boundary_edges].ravel())

    def boundary_edge_face(self, edge_id):
        """Which rectangle face a boundary edge lies on (or None)."""
        xmin, xmax, ymin, ymax = self.domain_box
        tol = 1e-12 * max(xmax - xmin, ymax - ymin, 1.0)
        a, b = self.edges[edge_id]
        pa, pb = self.vertices[a], self.vertices[b]
        if abs(pa[0] - xmin) < tol and abs(pb[0] - xmin) < tol:
            return "xmin"
        if abs(pa[0] - xmax) < tol and abs(pb[0] - xmax) < tol:
            return "xmax"
        if abs(pa[1] - ymin) < tol and abs(pb[1] - ymin) < tol:
            return "ymin"
        if abs(pa[1] - ymax) < tol and abs(pb[1] - ymax) < tol:
            return "ymax"
        return None

    def retag_boundary(self, face_tags):
        """Return a copy of this mesh with faces retagged.

        ``face_tags`` maps face names ("xmin", ...) to tags; faces not
        listed keep their current tag.
        """
        for face, tag in face_tags.items():
            if face not in FACES:
                raise MeshError(f"unknown face {face!r}")
            if tag not in VALID_TAGS:
                raise MeshError(f"unknown boundary tag {tag!r}")
        tags = dict(self.boundary_tags)
        for e in self.boundary_edges:
            face = self.boundary_edge_face(int(e))
            if face in face_tags:
                tags[int(e)] = face_tags[face]
        return Mesh(self.vertices, self.triangles, self.domain_box, tags)


@dataclass
class PeriodicMap:
    """Identification of boundary entities across periodic faces.

    Each pair is (master id, slave id, axis); vertex and edge pairs are
    kept separately.  Pairs may chain at corners (a corner vertex can be a
    slave along both axes); the degree-of-freedom layer collapses chains
    into single identification classes.
    """

    vertex_pairs: list = field(default_factory=list)
    edge_pairs: list = field(default_factory=list)

    @property
    def axes(self):
        return sorted({axis for _, _, axis in self.vertex_pairs})


def build_rect_mesh(nx, ny, box=(0.0, 1.0, 0.0, 1.0), pattern="right"):
    """Uniform triangulation of an axis-aligned box.

    Parameters
    ----------
    nx, ny : int
        Number of cells per direction (>= 1).
    box : tuple
        (xmin, xmax, ymin, ymax), well ordered.
    pattern : str
        "right" splits each cell along the bottom-left to top-right
        diagonal (default); "left" uses the other diagonal; "crisscross"
        splits each cell into four triangles around its center, keeping
        the mesh symmetric under the square's reflections.

    Returns
    -------
    Mesh with 2*nx*ny counter-clockwise triangles (4*nx*ny for the
    crisscross pattern), boundary tagged "wall".
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive integers")
    xmin, xmax, ymin, ymax = (float(v) for v in box)
    if not (xmin < xmax and ymin < ymax):
        raise MeshError(
            f"invalid box {box!r}: require xmin < xmax and ymin < ymax")
    if pattern not in ("right", "left", "crisscross"):
        raise MeshError(f"unknown split pattern {pattern!r}")

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(ix, iy):
        return iy * (nx + 1) + ix

    tris = []
    if pattern == "crisscross":
        centers = 0.25 * (vertices[[vid(ix, iy) for iy in range(ny)
                                    for ix in range(nx)]]
                          + vertices[[vid(ix + 1, iy) for iy in range(ny)
                                      for ix in range(nx)]]
                          + vertices[[vid(ix, iy + 1) for iy in range(ny)
                                      for ix in range(nx)]]
                          + vertices[[vid(ix + 1, iy + 1) for iy in range(ny)
                                      for ix in range(nx)]])
        base = vertices.shape[0]
        vertices = np.vstack([vertices, centers])
        for iy in range(ny):
            for ix in range(nx):
                c = base + iy * nx + ix
                v00 = vid(ix, iy)
                v10 = vid(ix + 1, iy)
                v01 = vid(ix, iy + 1)
                v11 = vid(ix + 1, iy + 1)
                tris.extend([(v00, v10, c), (v10, v11, c),
                             (v11, v01, c), (v01, v00, c)])
    else:
        for iy in range(ny):
            for ix in range(nx):
                v00 = vid(ix, iy)
                v10 = vid(ix + 1, iy)
                v01 = vid(ix, iy + 1)
                v11 = vid(ix + 1, iy + 1)
                if pattern == "right":
                    tris.append((v00, v10, v11))
                    tris.append((v00, v11, v01))
                else:
                    tris.append((v00, v10, v01))
                    tris.append((v10, v11, v01))
    return Mesh(vertices, np.array(tris), (xmin, xmax, ymin, ymax))


def build_periodic_map(mesh, axes):
    """Pair boundary vertices and edges across opposite faces.

    Parameters
    ----------
    mesh : Mesh
    axes : iterable subset of {"x", "y"}

    Returns
    -------
    PeriodicMap with master entities on the low face of each axis.
    """
    axes = sorted(set(axes))
    for a in axes:
        if a not in ("x", "y"):
            raise MeshError(f"unknown periodic axis {a!r}")
    xmin, xmax, ymin, ymax = mesh.domain_box
    pmap = PeriodicMap()
    if not axes:
        return pmap

    verts = mesh.vertices
    mids = mesh.edge_midpoints()
    for axis in axes:
        if axis == "x":
            lo, hi, period = xmin, xmax, xmax - xmin
            coord, other = 0, 1
        else:
            lo, hi, period = ymin, ymax, ymax - ymin
            coord, other = 1, 0
        tol = 1e-12 * period

        def match(entities, points, what):
            low = [i for i in entities if abs(points[i, coord] - lo) <= tol]
            high = [i for i in entities if abs(points[i, coord] - hi) <= tol]
            low = sorted(low, key=lambda i: points[i, other])
            high = sorted(high, key=lambda i: points[i, other])
            pairs = []
            used = [False] * len(high)
            for m in low:
                found = None
                for k, s in enumerate(high):
                    if not used[k] and abs(points[s, other] - points[m, other]) <= tol:
                        found = k
                        break
                if found is None:
                    raise MeshError(
                        f"periodic axis {axis}: no partner for {what} {m} "
                        f"at {tuple(points[m])}")
                used[found] = True
                pairs.append((m, high[found]))
            if not all(used):
                s = high[used.index(False)]
                raise MeshError(
                    f"periodic axis {axis}: unmatched {what} {s} at "
                    f"{tuple(points[s])}")
            return pairs

        bverts = [int(v) for v in mesh.boundary_vertices()]
        for m, s in match(bverts, verts, "vertex"):
            pmap.vertex_pairs.append((m, s, axis))
        bedges = [int(e) for e in mesh.boundary_edges]
        face_edges = [e for e in bedges
                      if mesh.boundary_edge_face(e) in
                      (("xmin", "xmax") if axis == "x" else ("ymin", "ymax"))]
        for m, s in match(face_edges, mids, "edge"):
            pmap.edge_pairs.append((m, s, axis))
    return pmap


def validate_mesh(mesh, area_rtol=1e-13):
    """Check mesh invariants; returns a list of violation messages.

    An empty report means the mesh is a valid conforming triangulation:
    positive triangle areas, interior edges shared by exactly two
    triangles, boundary edges by one, Euler relation V - E + T = 1, and
    triangle areas summing to the box area.
    """
    report = []
    areas = mesh.signed_areas()
    for t in np.flatnonzero(areas <= 0):
        report.append(f"triangle {t} has non-positive signed area {areas[t]:.3e}")

    tris = mesh.triangles
    pairs = np.concatenate([
        tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]],
    ])
    pairs_sorted = np.sort(pairs, axis=1)
    uniq, counts = np.unique(pairs_sorted, axis=0, return_counts=True)
    for k in np.flatnonzero(counts > 2):
        report.append(
            f"edge {tuple(uniq[k])} shared by {counts[k]} triangles")

    V, E, T = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    if V - E + T != 1:
        report.append(f"Euler relation violated: V-E+T = {V - E + T} != 1")

    xmin, xmax, ymin, ymax = mesh.domain_box
    box_area = (xmax - xmin) * (ymax - ymin)
    total = float(np.abs(areas).sum())
    if abs(total - box_area) > area_rtol * box_area:
        report.append(
            f"triangle areas sum to {total!r}, box area is {box_area!r}")

    for e in mesh.boundary_edges:
        if int(e) not in mesh.boundary_tags:
            report.append(f"boundary edge {int(e)} has no tag")
    return report
