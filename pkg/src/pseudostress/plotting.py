"""Matplotlib figures for the report path (Agg backend, files only)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from .export import vertex_displacement  # noqa: E402

# PNG metadata carries the matplotlib version by default; drop it so files are reproducible
_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def plot_relative_errors(rows, path, title=None) -> Path:
    """Log-log plot of relative frequency errors against h, one line per mode.

    ``rows`` are dicts with keys mode, h, rel_err, ref, rate (see ``relative_errors``).
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    modes = sorted({r["mode"] for r in rows})
    for m in modes:
        sel = [r for r in rows if r["mode"] == m]
        h = np.array([r["h"] for r in sel])
        e = np.array([r["rel_err"] for r in sel])
        ax.loglog(h, e, "o-", ms=4, label=f"mode {m}")
    if rows:
        sel = [r for r in rows if r["mode"] == modes[0]]
        h = np.array([r["h"] for r in sel])
        ax.loglog(h, [r["ref"] for r in sel], "k--", lw=1, label=f"O(h^{sel[0]['rate']:g})")
    ax.set_xlabel("h")
    ax.set_ylabel("relative error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_displacement_magnitude(mesh, k, u, path, title=None, dofmap=None) -> Path:
    """|u_h| coloured on the mesh, with vertex values averaged from adjacent cells."""
    path = Path(path)
    vals = np.linalg.norm(vertex_displacement(mesh, k, u, dofmap), axis=1)
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.cells)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    pc = ax.tripcolor(tri, vals, shading="gouraud", cmap="viridis")
    fig.colorbar(pc, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
