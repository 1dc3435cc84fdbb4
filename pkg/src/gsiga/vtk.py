"""Legacy ASCII VTK export of the six-patch surface."""
from dataclasses import dataclass

import numpy as np

from .geometry import curvature_from_derivatives, metric_from_jacobian
from .topology import FACES, eval_local


@dataclass
class SurfaceMesh:
    points: np.ndarray  # (N, 3)
    quads: np.ndarray  # (M, 4)
    scalars: dict

    @property
    def euler_characteristic(self):
        edges = set()
        for q in self.quads:
            for a, b in zip(q, np.roll(q, -1)):
                edges.add((min(a, b), max(a, b)))
        return len(self.points) - len(edges) + len(self.quads)


def sample_surface(space, control_points, fields=None, m=20):
    """Sample the mapping (and scalar fields) on an ``m x m`` grid per patch.

    Grid vertices on shared patch edges are merged, so the result is a closed
    quad mesh. ``fields`` maps names to coefficient vectors; the squared
    curvature sum is added as ``curvature`` (NaN on patch edges and for
    ``p < 2``).
    """
    fields = dict(fields or {})
    t = np.linspace(0.0, 1.0, m)
    X, Y = np.meshgrid(t, t, indexing="ij")
    uni = space.fine_map.univariate
    loc_s = space.to_local(control_points)
    loc_f = {k: space.to_local(v) for k, v in fields.items()}

    ids = {}
    pts, vals, quads = [], {k: [] for k in list(fields) + ["curvature"]}, []
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    for f in FACES:
        s = eval_local(uni, loc_s[f.id], X, Y)
        fv = {k: eval_local(uni, loc_f[k][f.id], X, Y) for k in fields}
        curv = np.full((m, m), np.nan)
        if space.p >= 2 and m > 2:
            xi, eta = X[1:-1, 1:-1], Y[1:-1, 1:-1]
            J = np.stack([eval_local(uni, loc_s[f.id], xi, eta, (1, 0)), eval_local(uni, loc_s[f.id], xi, eta, (0, 1))], -1)
            c = curvature_from_derivatives(
                J,
                eval_local(uni, loc_s[f.id], xi, eta, (2, 0)),
                eval_local(uni, loc_s[f.id], xi, eta, (1, 1)),
                eval_local(uni, loc_s[f.id], xi, eta, (0, 2)),
                metric_from_jacobian(J),
            )
            curv[1:-1, 1:-1] = c.squared_sum
        # integer cube-lattice key identifies shared vertices
        lat = np.zeros((m, m, 3), dtype=np.int64)
        lat[..., f.normal_axis] = f.sign * (m - 1)
        lat[..., f.u_axis] = 2 * ii - (m - 1)
        lat[..., f.v_axis] = 2 * jj - (m - 1)
        vid = np.empty((m, m), dtype=np.int64)
        for i in range(m):
            for j in range(m):
                key = tuple(lat[i, j])
                if key not in ids:
                    ids[key] = len(pts)
                    pts.append(s[i, j])
                    for k in fields:
                        vals[k].append(fv[k][i, j])
                    vals["curvature"].append(curv[i, j])
                vid[i, j] = ids[key]
        for i in range(m - 1):
            for j in range(m - 1):
                quads.append((vid[i, j], vid[i + 1, j], vid[i + 1, j + 1], vid[i, j + 1]))
    return SurfaceMesh(np.array(pts), np.array(quads, dtype=np.int64), {k: np.array(v) for k, v in vals.items()})


def write_vtk(mesh, path, title="gsiga surface"):
    """Write ``mesh`` as a legacy ASCII unstructured grid of quads."""
    n, nq = len(mesh.points), len(mesh.quads)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        np.savetxt(fh, mesh.points, fmt="%.17g")
        fh.write(f"CELLS {nq} {5 * nq}\n")
        np.savetxt(fh, np.column_stack([np.full(nq, 4), mesh.quads]), fmt="%d")
        fh.write(f"CELL_TYPES {nq}\n")
        np.savetxt(fh, np.full(nq, 9), fmt="%d")
        fh.write(f"POINT_DATA {n}\n")
        for name, v in mesh.scalars.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, v, fmt="%.17g")


def export_surface(space, control_points, path, c=None, d=None, m=20):
    """Sample and write the surface with vertex scalars ``u``, ``v`` and
    ``curvature``; returns the mesh."""
    fields = {}
    if c is not None:
        fields["u"] = c
    if d is not None:
        fields["v"] = d
    mesh = sample_surface(space, control_points, fields, m)
    write_vtk(mesh, path)
    return mesh


def read_vtk(path):
    """Read a file written by :func:`write_vtk` back into a SurfaceMesh."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    pts = quads = None
    scalars = {}
    for i in range(len(lines)):
        tok = lines[i].split()
        if not tok:
            continue
        if tok[0] == "POINTS":
            n = int(tok[1])
            pts = np.array([lines[i + 1 + k].split() for k in range(n)], dtype=float)
        elif tok[0] == "CELLS":
            nq = int(tok[1])
            quads = np.array([lines[i + 1 + k].split()[1:] for k in range(nq)], dtype=np.int64)
        elif tok[0] == "SCALARS":
            name = tok[1]
            scalars[name] = np.array([float(lines[i + 2 + k]) for k in range(len(pts))])
    if pts is None or quads is None:
        raise ValueError(f"{path} is not a gsiga surface mesh")
    return SurfaceMesh(pts, quads, scalars)
