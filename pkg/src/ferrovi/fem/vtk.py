"""Legacy ASCII VTK output for triangle meshes."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def _fmt(v) -> str:
    return repr(float(v))


def _pad3(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.concatenate([a, np.zeros((a.shape[0], 3 - a.shape[1]))], axis=1)


def write_vtk(path, mesh: Mesh, point_vectors: dict | None = None, cell_scalars: dict | None = None,
              cell_vectors: dict | None = None, title: str = "ferrovi") -> None:
    """Write an unstructured grid with point vectors and cell scalars/vectors."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    pts = _pad3(mesh.vertices)
    lines.append(f"POINTS {len(pts)} double")
    lines += [" ".join(_fmt(v) for v in p) for p in pts]
    ne = mesh.n_elements
    lines.append(f"CELLS {ne} {4 * ne}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {ne}")
    lines += ["5"] * ne
    if point_vectors:
        lines.append(f"POINT_DATA {len(pts)}")
        for name, vec in point_vectors.items():
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(v) for v in row) for row in _pad3(vec)]
    if cell_scalars or cell_vectors:
        lines.append(f"CELL_DATA {ne}")
        for name, vals in (cell_scalars or {}).items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [_fmt(v) for v in np.asarray(vals).ravel()]
        for name, vec in (cell_vectors or {}).items():
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(v) for v in row) for row in _pad3(vec)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fields(path, mesh: Mesh, fields: dict, title: str = "ferrovi") -> None:
    """Write the standard output fields produced by ``FeSystem.postprocess``."""
    scalars = {"absP": fields["absP"], "T_xx": fields["T_xx"], "divD": fields["divD"]}
    if "phi" in fields:
        scalars["phi"] = fields["phi"]
    write_vtk(path, mesh, point_vectors={"u": fields["u"]}, cell_scalars=scalars,
              cell_vectors={"P": fields["P"], "D": fields["D"], "E": fields["E"]}, title=title)
