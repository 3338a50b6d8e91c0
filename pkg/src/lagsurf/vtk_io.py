"""Legacy ASCII VTK PolyData output: one vertex cell per point, per-point
scalars (chamber, h, boundary flag, named fields) and vectors (normal,
velocity).  Float formatting is fixed at 17 significant digits so identical
input produces byte-identical files."""

from __future__ import annotations

import numpy as np

from .point_cloud import PointCloud


def _fmt(x):
    return f"{float(x):.17g}"


def write_vtk(cloud: PointCloud, path, fields=None):
    """Write the cloud as VTK legacy POLYDATA with POINT_DATA attributes."""
    names = sorted(cloud.fields) if fields is None else [n for n in fields if n in cloud.fields]
    n = cloud.n_points
    try:
        f = open(path, "w")
    except OSError as err:
        raise OSError(f"cannot write VTK file {path}: {err}") from err
    with f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("lagsurf point cloud\n")
        f.write("ASCII\nDATASET POLYDATA\n")
        f.write(f"POINTS {n} double\n")
        for p in cloud.positions:
            f.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        f.write(f"VERTICES {n} {2 * n}\n")
        for i in range(n):
            f.write(f"1 {i}\n")
        f.write(f"POINT_DATA {n}\n")
        f.write("SCALARS chamber int 1\nLOOKUP_TABLE default\n")
        for c in cloud.chamber:
            f.write(f"{int(c)}\n")
        f.write("SCALARS boundary_flag int 1\nLOOKUP_TABLE default\n")
        for b in cloud.boundary:
            f.write(f"{int(b)}\n")
        f.write("SCALARS h double 1\nLOOKUP_TABLE default\n")
        for v in cloud.h:
            f.write(_fmt(v) + "\n")
        for name in names:
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in cloud.fields[name]:
                f.write(_fmt(v) + "\n")
        f.write("VECTORS normal double\n")
        for v in cloud.normal:
            f.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        f.write("VECTORS velocity double\n")
        for v in cloud.velocity:
            f.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")


def read_vtk_points(path):
    """Positions back from a legacy VTK file (for round-trip checks)."""
    with open(path) as f:
        lines = f.readlines()
    for k, line in enumerate(lines):
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            data = [list(map(float, lines[k + 1 + i].split())) for i in range(n)]
            return np.array(data)
    raise ValueError(f"{path}: no POINTS section found")
