import numpy as np
import pytest

from pseudostress import Mesh, assemble_system, build_lame, generate_mesh
from pseudostress.oracle import OracleSizeError, dense_assemble, dense_eig
from pseudostress.spectral import solve_system


def _dense(a):
    return np.asarray(a.todense()) if hasattr(a, "todense") else np.asarray(a)


def _max_rel(sparse, dense):
    return np.abs(_dense(sparse) - dense).max() / np.abs(dense).max()


def _check_agreement(mesh, k, material, tol=1e-11):
    s = assemble_system(mesh, k, material)
    d = dense_assemble(mesh, k, material)
    for name in "ABMc":
        assert _max_rel(getattr(s, name), getattr(d, name)) < tol, name


def test_square_n2_k0_matches(square2, steel_like):
    _check_agreement(square2, 0, steel_like)


def test_single_cell_k1_matches(steel_like):
    mesh = Mesh([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]], [[0, 1, 2]]).validate()
    _check_agreement(mesh, 1, steel_like)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_limit_material_matches(square2, k):
    _check_agreement(square2, k, build_lame(1.0, 0.5))


@pytest.mark.parametrize("domain,N,k", [("lshape", 1, 1), ("disk", 2, 2), ("disk", 1, 0)])
def test_other_domains_match(domain, N, k):
    _check_agreement(generate_mesh(domain, N), k, build_lame(2.0, 0.2))


def test_size_limits():
    mesh = generate_mesh("square", 12)
    with pytest.raises(OracleSizeError):
        dense_assemble(mesh, 1, build_lame(1.0, 0.3))
    with pytest.raises(OracleSizeError):
        dense_eig(assemble_system(generate_mesh("square", 8), 0, build_lame(1.0, 0.3)))


def test_dense_spectrum_is_real(steel_like):
    system = assemble_system(generate_mesh("square", 2), 1, steel_like)
    vals, imag = dense_eig(system, return_imag=True)
    assert imag < 1e-10
    assert np.all(vals > 0)


def test_sparse_matches_dense_square_n1(steel_like):
    system = assemble_system(generate_mesh("square", 1), 0, steel_like)
    dense = dense_eig(system)
    sol = solve_system(system, len(dense))
    assert len(sol) == len(dense)
    np.testing.assert_allclose(sol.eigenvalues, dense, rtol=1e-9)


@pytest.mark.parametrize("nu", [0.35, 0.5])
@pytest.mark.parametrize("k", [0, 1])
def test_sparse_matches_dense_n2(nu, k):
    system = assemble_system(generate_mesh("square", 2), k, build_lame(1.0, nu))
    dense = dense_eig(system)
    sol = solve_system(system, 6)
    np.testing.assert_allclose(sol.eigenvalues, dense[: len(sol)], rtol=1e-9)


@pytest.mark.parametrize("shift", [-3.0, -0.5, 0.0, 1.0])
def test_finite_count_independent_of_shift(shift, steel_like):
    system = assemble_system(generate_mesh("square", 1), 0, steel_like)
    dense = dense_eig(system)
    sol = solve_system(system, len(dense), shift=shift)
    assert len(sol) == len(dense)
    np.testing.assert_allclose(sol.eigenvalues, dense, rtol=1e-9)
