"""File writers for solutions: JSON/CSV records and legacy VTK fields."""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .assembly import evaluate_u
from .spectral import cluster_indices

SCHEMA_VERSION = 1
_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def vertex_displacement(mesh, k: int, u, dofmap=None) -> np.ndarray:
    """Cellwise P_k displacement sampled at vertices, averaged over adjacent cells."""
    vals = evaluate_u(mesh, k, u, _REF_VERTICES, dofmap)  # (nc, 3, 2)
    acc = np.zeros((mesh.n_vertices, 2))
    count = np.zeros(mesh.n_vertices)
    np.add.at(acc, mesh.cells.ravel(), vals.reshape(-1, 2))
    np.add.at(count, mesh.cells.ravel(), 1.0)
    return acc / np.maximum(count, 1.0)[:, None]


def vtk_text(mesh, point_vectors: dict, title: str = "displacement") -> str:
    """Legacy ASCII UNSTRUCTURED_GRID with vector point data and magnitudes."""
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(title.replace("\n", " ")[:255] + "\n")
    out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.vertices:
        out.write(f"{x!r} {y!r} 0.0\n")
    nc = mesh.n_cells
    out.write(f"CELLS {nc} {4 * nc}\n")
    for a, b, c in mesh.cells:
        out.write(f"3 {a} {b} {c}\n")
    out.write(f"CELL_TYPES {nc}\n")
    out.write("5\n" * nc)
    out.write(f"POINT_DATA {mesh.n_vertices}\n")
    for name, vec in point_vectors.items():
        vec = np.asarray(vec, dtype=float)
        out.write(f"VECTORS {name} double\n")
        for vx, vy in vec:
            out.write(f"{float(vx)!r} {float(vy)!r} 0.0\n")
        out.write(f"SCALARS {name}_magnitude double 1\nLOOKUP_TABLE default\n")
        for m in np.linalg.norm(vec, axis=1):
            out.write(f"{float(m)!r}\n")
    return out.getvalue()


def write_vtk(path, mesh, point_vectors: dict, title: str = "displacement") -> Path:
    path = Path(path)
    path.write_text(vtk_text(mesh, point_vectors, title))
    return path


def solution_record(sol, config: dict) -> dict:
    """JSON-ready summary of an EigenSolution with the resolved run config."""
    w = sol.frequencies
    cluster_of = {}
    for ci, group in enumerate(cluster_indices(w)):
        for i in group:
            cluster_of[i] = ci
    system = sol.system
    modes = [
        {
            "mode": i + 1,
            "kappa": float(sol.eigenvalues[i]),
            "omega": float(w[i]),
            "residual": float(sol.residuals[i]),
            "cluster": cluster_of[i],
        }
        for i in range(len(w))
    ]
    rec = {"schema_version": SCHEMA_VERSION, "config": config, "modes": modes}
    if system is not None:
        rec["mesh"] = {"n_vertices": system.mesh.n_vertices, "n_cells": system.mesh.n_cells, "h": system.mesh.h}
        rec["dofs"] = {"n_rho": system.n_rho, "n_u": system.n_u}
    return rec


def solution_json(sol, config: dict) -> str:
    return json.dumps(solution_record(sol, config), indent=2, sort_keys=True) + "\n"


def solution_csv(sol, config: dict) -> str:
    rec = solution_record(sol, config)
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    buf.write("# config=" + json.dumps(config, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    cols = ("mode", "kappa", "omega", "residual", "cluster")
    writer.writerow(cols)
    for m in rec["modes"]:
        writer.writerow([repr(m[c]) if isinstance(m[c], float) else m[c] for c in cols])
    return buf.getvalue()
