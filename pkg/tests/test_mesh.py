import numpy as np
import pytest

from pseudostress.mesh import (
    DIAGONAL,
    DomainKind,
    DomainSpec,
    Mesh,
    MeshError,
    export_mesh,
    generate_mesh,
    import_mesh,
)


@pytest.mark.parametrize("N,nv,nc,ne", [(1, 4, 2, 5), (2, 9, 8, 16), (5, 36, 50, 85)])
def test_square_counts(N, nv, nc, ne):
    m = generate_mesh("square", N)
    assert (m.n_vertices, m.n_cells, m.n_edges) == (nv, nc, ne)
    assert m.n_cells == 2 * N**2 and m.n_vertices == (N + 1) ** 2


def test_lshape_counts():
    m = generate_mesh("lshape", 2)
    assert m.n_cells == 24
    assert abs(m.areas.sum() - 3.0) < 1e-14
    c = m.vertices[m.cells].mean(axis=1)
    assert not np.any((c[:, 0] < 0) & (c[:, 1] < 0))


def test_disk_boundary_on_circle():
    m = generate_mesh("disk", 6)
    bv = np.unique(m.edges[m.boundary_edges])
    r = np.hypot(*m.vertices[bv].T)
    np.testing.assert_allclose(r, 1.0, atol=1e-15)
    assert len(bv) == 8 * 6
    assert m.n_cells == 8 * 36


@pytest.mark.parametrize("domain", ["square", "lshape", "disk"])
@pytest.mark.parametrize("N", [1, 2, 3, 7, 16])
def test_invariants(domain, N):
    m = generate_mesh(domain, N)
    assert np.all(m.signed_areas > 0)
    assert 2 * m.n_edges == 3 * m.n_cells + m.boundary_edges.sum()
    counts = np.bincount(m.cell_edges.ravel(), minlength=m.n_edges)
    assert set(counts[~m.boundary_edges]) <= {2}
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    assert m.min_angle() >= 20.0


@pytest.mark.parametrize("domain,lo,hi", [("square", 1.3, 1.5), ("lshape", 1.3, 1.5), ("disk", 1.0, 2.0)])
def test_h_scales_with_inverse_n(domain, lo, hi):
    for N in (2, 4, 8, 16, 32, 64):
        hN = generate_mesh(domain, N).h * N
        assert lo <= hN <= hi


def test_edge_signs_consistent():
    m = generate_mesh("disk", 3)
    local = np.stack([m.cells[:, [1, 2]], m.cells[:, [2, 0]], m.cells[:, [0, 1]]], axis=1)
    expected = np.where(local[..., 0] < local[..., 1], 1, -1)
    np.testing.assert_array_equal(m.edge_signs, expected)
    glob = m.edges[m.cell_edges]
    np.testing.assert_array_equal(np.sort(local, axis=2), glob)


def test_alternating_diagonal():
    assert DIAGONAL == "alternating"
    m = generate_mesh("square", 2)
    # both diagonal directions occur
    d = m.vertices[m.edges[:, 1]] - m.vertices[m.edges[:, 0]]
    diag = d[(d[:, 0] != 0) & (d[:, 1] != 0)]
    slopes = set(np.sign(diag[:, 0] * diag[:, 1]).tolist())
    assert slopes == {1.0, -1.0}


def test_bad_inputs():
    with pytest.raises(MeshError):
        generate_mesh("square", 0)
    with pytest.raises(MeshError):
        generate_mesh("hexagon", 3)
    with pytest.raises(MeshError):
        DomainSpec.parse("imported")


def test_roundtrip(tmp_path):
    m = generate_mesh("square", 2)
    path = tmp_path / "sq.mesh"
    export_mesh(m, path)
    m2 = import_mesh(path)
    np.testing.assert_array_equal(m2.vertices, m.vertices)
    np.testing.assert_array_equal(m2.cells, m.cells)
    np.testing.assert_array_equal(m2.edges, m.edges)
    assert m2.domain.kind is DomainKind.IMPORTED
    export_mesh(m2, tmp_path / "again.mesh")
    assert (tmp_path / "again.mesh").read_bytes() == path.read_bytes()


def test_roundtrip_disk_bitwise(tmp_path):
    m = generate_mesh("disk", 4)
    export_mesh(m, tmp_path / "d.mesh")
    np.testing.assert_array_equal(import_mesh(tmp_path / "d.mesh").vertices, m.vertices)


def _write(path, verts, cells):
    lines = ["mesh 2 tri", f"vertices {len(verts)}"] + [f"{x} {y}" for x, y in verts]
    lines += [f"cells {len(cells)}"] + [" ".join(map(str, c)) for c in cells]
    path.write_text("\n".join(lines) + "\n")


SQ = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_repeated_cell(tmp_path):
    _write(tmp_path / "m", SQ, [(0, 1, 2), (0, 1, 2), (0, 2, 3)])
    with pytest.raises(MeshError, match="non-conforming"):
        import_mesh(tmp_path / "m")


def test_clockwise_cell(tmp_path):
    _write(tmp_path / "m", SQ, [(0, 2, 1), (0, 2, 3)])
    with pytest.raises(MeshError, match="inverted"):
        import_mesh(tmp_path / "m")


def test_hanging_node(tmp_path):
    verts = SQ + [(0.5, 0.5)]
    # cell (0, 1, 2) spans the diagonal on which vertex 4 sits
    _write(tmp_path / "m", verts, [(0, 1, 2), (0, 4, 3), (4, 2, 3)])
    with pytest.raises(MeshError, match="hanging"):
        import_mesh(tmp_path / "m")


@pytest.mark.parametrize("text", ["", "mesh 3 tet\n", "mesh 2 tri\nvertices 2\n0 0\n", "mesh 2 tri\nvertices x\n"])
def test_parse_errors(tmp_path, text):
    (tmp_path / "m").write_text(text)
    with pytest.raises(MeshError):
        import_mesh(tmp_path / "m")


def test_mesh_is_immutable():
    m = generate_mesh("square", 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_direct_construction_validates():
    with pytest.raises(MeshError):
        Mesh(np.zeros((3, 3)), [[0, 1, 2]])
    with pytest.raises(MeshError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 5]])
