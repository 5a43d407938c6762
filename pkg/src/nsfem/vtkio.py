"""Legacy ASCII VTK output for meshes and solution snapshots."""


def _write_header(fh, mesh, title):
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(f"{title}\n")
    fh.write("ASCII\n")
    fh.write("DATASET UNSTRUCTURED_GRID\n")
    V = mesh.n_vertices
    fh.write(f"POINTS {V} double\n")
    for x, y in mesh.vertices:
        fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
    T = mesh.n_triangles
    fh.write(f"CELLS {T} {4 * T}\n")
    for a, b, c in mesh.triangles:
        fh.write(f"3 {a} {b} {c}\n")
    fh.write(f"CELL_TYPES {T}\n")
    for _ in range(T):
        fh.write("5\n")


def write_vtk_mesh(path, mesh, title="mesh"):
    """Write the triangulation alone as a legacy unstructured grid."""
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, mesh, title)


def write_vtk_snapshot(path, mesh, velocity=None, pressure=None,
                       scalar=None, title="snapshot"):
    """Write vertex-sampled fields as point data on the triangulation.

    Velocity vertex values are the first 2V entries of the quadratic
    coefficient vector; pressure lives on vertices already.
    """
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, mesh, title)
        V = mesh.n_vertices
        wrote_point_header = False

        def point_header():
            nonlocal wrote_point_header
            if not wrote_point_header:
                fh.write(f"POINT_DATA {V}\n")
                wrote_point_header = True

        if velocity is not None:
            point_header()
            fh.write("VECTORS velocity double\n")
            c = velocity.coeffs
            for v in range(V):
                fh.write(f"{float(c[2 * v])!r} {float(c[2 * v + 1])!r} 0.0\n")
        if pressure is not None:
            point_header()
            fh.write("SCALARS pressure double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in range(V):
                fh.write(f"{float(pressure.coeffs[v])!r}\n")
        if scalar is not None:
            point_header()
            fh.write("SCALARS scalar double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in range(V):
                fh.write(f"{float(scalar.coeffs[v])!r}\n")
