"""Conforming triangulations of the test domains with oriented edge topology."""

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .elements import LOCAL_EDGES


class MeshError(ValueError):
    """Invalid or non-conforming mesh data."""


class DomainKind(str, enum.Enum):
    UNIT_SQUARE = "square"
    LSHAPE = "lshape"
    DISK = "disk"
    IMPORTED = "imported"


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    path: str | None = None

    @classmethod
    def parse(cls, name: str, path=None) -> "DomainSpec":
        try:
            kind = DomainKind(name)
        except ValueError:
            raise MeshError(f"unsupported domain kind {name!r}") from None
        if kind is DomainKind.IMPORTED and path is None:
            raise MeshError("imported domain requires a mesh file path")
        return cls(kind, None if path is None else str(path))

    @property
    def area(self) -> float | None:
        """Exact area of the continuous domain (None for imported meshes)."""
        return {
            DomainKind.UNIT_SQUARE: 1.0,
            DomainKind.LSHAPE: 3.0,
            DomainKind.DISK: math.pi,
        }.get(self.kind)


# Grid square (i, j) is split by its lower-left/upper-right diagonal when
# i + j is even and by the other diagonal otherwise. For even N the square
# mesh keeps the full symmetry group of the square, so degenerate eigenvalue
# pairs stay exactly degenerate.
DIAGONAL = "alternating"


class Mesh:
    """Immutable triangulation.

    Cells are positively oriented vertex triples. Edges are stored as
    ``(a, b)`` with ``a < b``; ``cell_edges[c, i]`` is the global edge of
    local edge ``i`` (opposite local vertex ``i``) and ``edge_signs[c, i]`` is
    +1 when the counter-clockwise local direction matches the global
    ascending-index direction.
    """

    def __init__(self, vertices, cells, N=None, domain=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise MeshError("cells must have shape (n, 3)")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell references a vertex index out of range")
        self.vertices = vertices
        self.cells = cells
        self.N = N
        self.domain = domain
        self._build_topology()
        for arr in (self.vertices, self.cells, self.edges, self.cell_edges, self.edge_signs, self.boundary_edges):
            arr.setflags(write=False)

    def _build_topology(self):
        cells = self.cells
        local = np.stack([np.stack([cells[:, a], cells[:, b]], axis=1) for a, b in LOCAL_EDGES], axis=1)
        lo = local.min(axis=2)
        hi = local.max(axis=2)
        keys = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        self.edges = edges
        self.cell_edges = inverse.reshape(-1, 3)
        self.edge_signs = np.where(local[:, :, 0] < local[:, :, 1], 1, -1).astype(np.int64)
        self.boundary_edges = counts == 1
        self._edge_counts = counts

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Affine maps from the reference triangle, shape (n_cells, 2, 2)."""
        p = self.vertices[self.cells]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.det(self.jacobians)

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        return self.edge_lengths[self.cell_edges].max(axis=1)

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    def min_angle(self) -> float:
        """Smallest interior angle over all cells, in degrees."""
        p = self.vertices[self.cells]
        worst = np.pi
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            worst = min(worst, float(np.arccos(np.clip(cosang, -1.0, 1.0)).min()))
        return math.degrees(worst)

    def validate(self) -> "Mesh":
        """Raise MeshError unless the mesh is conforming and positively oriented."""
        if self.n_cells == 0:
            raise MeshError("mesh has no cells")
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.flatnonzero(self.signed_areas <= 0.0)[0])
            raise MeshError(f"inverted or degenerate cell {bad}")
        sorted_cells = np.sort(self.cells, axis=1)
        if len(np.unique(sorted_cells, axis=0)) != self.n_cells:
            raise MeshError("non-conforming mesh: repeated cell")
        if np.any(self._edge_counts > 2):
            raise MeshError("non-conforming mesh: edge shared by more than two cells")
        # two positively oriented neighbours traverse a shared edge in opposite directions
        flat_edges = self.cell_edges.ravel()
        flat_signs = self.edge_signs.ravel()
        sign_sum = np.bincount(flat_edges, weights=flat_signs, minlength=self.n_edges)
        if np.any(sign_sum[~self.boundary_edges] != 0):
            raise MeshError("non-conforming mesh: overlapping cells on an interior edge")
        self._check_hanging_nodes()
        if (3 * self.n_cells + int(self.boundary_edges.sum())) != 2 * self.n_edges:
            raise MeshError("edge count identity violated")
        return self

    def _check_hanging_nodes(self):
        bnd = self.edges[self.boundary_edges]
        a = self.vertices[bnd[:, 0]]
        d = self.vertices[bnd[:, 1]] - a
        len2 = np.einsum("ij,ij->i", d, d)
        tol = 1e-10
        for start in range(0, self.n_vertices, 2048):
            p = self.vertices[start : start + 2048]
            rel = p[None, :, :] - a[:, None, :]
            t = np.einsum("eij,ej->ei", rel, d) / len2[:, None]
            cross = rel[..., 0] * d[:, None, 1] - rel[..., 1] * d[:, None, 0]
            on_edge = (t > tol) & (t < 1 - tol) & (np.abs(cross) <= tol * len2[:, None])
            if on_edge.any():
                e, v = np.argwhere(on_edge)[0]
                raise MeshError(f"non-conforming mesh: hanging node {start + v} on edge {tuple(bnd[e])}")


def _grid_cells(nx, ny, keep=None):
    """Split grid squares by a checkerboard of alternating diagonals."""
    cells = []
    for j in range(ny):
        for i in range(nx):
            if keep is not None and not keep(i, j):
                continue
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + nx + 1
            v11 = v01 + 1
            if (i + j) % 2 == 0:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            else:
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
    return np.array(cells, dtype=np.int64)


def _grid_vertices(nx, ny, x0, y0, N):
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    return np.stack([x0 + i.ravel() / N, y0 + j.ravel() / N], axis=1)


def _compress(vertices, cells):
    used = np.unique(cells)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[cells]


def _unit_square(N):
    return _grid_vertices(N, N, 0.0, 0.0, N), _grid_cells(N, N)


def _lshape(N):
    n = 2 * N
    # drop squares whose centroid lies in [-1, 0]^2
    cells = _grid_cells(n, n, keep=lambda i, j: not (i < N and j < N))
    return _compress(_grid_vertices(n, n, -1.0, -1.0, N), cells)


def _disk(N):
    """N concentric rings at radius j/N with 8j vertices each and a central fan."""
    verts = [(0.0, 0.0)]
    ring_start = [0]
    for j in range(1, N + 1):
        ring_start.append(len(verts))
        theta = 2.0 * np.pi * np.arange(8 * j) / (8 * j)
        r = j / N
        verts.extend(zip(r * np.cos(theta), r * np.sin(theta)))
    cells = []
    first = ring_start[1]
    for i in range(8):
        cells.append((0, first + i, first + (i + 1) % 8))
    for j in range(2, N + 1):
        m_in, m_out = 8 * (j - 1), 8 * j
        s_in, s_out = ring_start[j - 1], ring_start[j]
        a = b = 0
        # advance along whichever ring reaches the smaller next angle
        while a < m_in or b < m_out:
            next_in = (a + 1) / m_in
            next_out = (b + 1) / m_out
            if b < m_out and (a >= m_in or next_out <= next_in):
                cells.append((s_in + a % m_in, s_out + b, s_out + (b + 1) % m_out))
                b += 1
            else:
                cells.append((s_in + a, s_out + b % m_out, s_in + (a + 1) % m_in))
                a += 1
    return np.array(verts), np.array(cells, dtype=np.int64)


_GENERATORS = {
    DomainKind.UNIT_SQUARE: _unit_square,
    DomainKind.LSHAPE: _lshape,
    DomainKind.DISK: _disk,
}


def generate_mesh(spec, N: int) -> Mesh:
    """Structured triangulation of a built-in domain with refinement parameter N."""
    if isinstance(spec, str):
        spec = DomainSpec.parse(spec)
    if spec.kind is DomainKind.IMPORTED:
        return import_mesh(spec.path)
    if spec.kind not in _GENERATORS:
        raise MeshError(f"unsupported domain kind {spec.kind!r}")
    if int(N) != N or N < 1:
        raise MeshError(f"refinement parameter must be a positive integer, got {N!r}")
    vertices, cells = _GENERATORS[spec.kind](int(N))
    p = vertices[cells]
    # enforce counter-clockwise orientation
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    cells[det < 0] = cells[det < 0][:, [0, 2, 1]]
    return Mesh(vertices, cells, N=int(N), domain=spec).validate()


def export_mesh(mesh: Mesh, path) -> None:
    """Write the ASCII mesh format (``mesh 2 tri`` header, 0-based cells)."""
    lines = ["mesh 2 tri", f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"cells {mesh.n_cells}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.cells.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def import_mesh(path) -> Mesh:
    """Read and validate a mesh in the ASCII format written by ``export_mesh``."""
    try:
        tokens = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc
    try:
        if tokens[0] != ["mesh", "2", "tri"]:
            raise MeshError("missing 'mesh 2 tri' header")
        if tokens[1][0] != "vertices":
            raise MeshError("expected 'vertices <count>'")
        nv = int(tokens[1][1])
        vertices = np.array([[float(t) for t in row] for row in tokens[2 : 2 + nv]])
        head = tokens[2 + nv]
        if head[0] != "cells":
            raise MeshError("expected 'cells <count>'")
        nc = int(head[1])
        cell_rows = tokens[3 + nv : 3 + nv + nc]
        cells = np.array([[int(t) for t in row] for row in cell_rows], dtype=np.int64)
        if len(cell_rows) != nc or vertices.shape != (nv, 2) or cells.shape != (nc, 3):
            raise MeshError("vertex or cell count does not match the data")
        if len(tokens) != 3 + nv + nc:
            raise MeshError("trailing data after cell block")
    except MeshError:
        raise
    except (IndexError, ValueError) as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from exc
    return Mesh(vertices, cells, domain=DomainSpec(DomainKind.IMPORTED, str(path))).validate()
