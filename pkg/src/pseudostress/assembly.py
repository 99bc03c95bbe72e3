"""Global DOF maps and sparse assembly of the mixed pseudostress-displacement blocks.

The tensor unknown is stored row-major: each of the two rows is an
independent scalar RT_k field. The displacement space is discontinuous P_k
with the physical basis ``p_hat(F^{-1} x) / sqrt(2)``, which makes the mass
matrix diagonal with the cell areas on the diagonal.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sps

from .elements import (
    LOCAL_EDGES,
    piola_map,
    reference_pk_basis,
    reference_rt_basis,
)
from .quadrature import gauss_legendre_01, legendre_01, quadrature

DIM = 2
CELL_CHUNK = 4096


def assembly_degree(k: int) -> int:
    """Quadrature degree used for all assembly."""
    return 2 * (k + 1) + 2


@dataclass(frozen=True)
class MaterialParams:
    """Lame parameters; ``lam`` is ``math.inf`` in the incompressible limit."""

    E: float
    nu: float
    lam: float
    mu: float
    n: int = DIM

    @property
    def is_limit(self) -> bool:
        return math.isinf(self.lam)

    @property
    def trace_coef_original(self) -> float:
        """(lam + mu) / (mu (n lam + (n + 1) mu)) in the original form of a(.,.)."""
        if self.is_limit:
            raise ValueError("original bilinear form is undefined for lambda = infinity")
        n, lam, mu = self.n, self.lam, self.mu
        return (lam + mu) / (mu * (n * lam + (n + 1) * mu))

    @property
    def trace_coef_deviatoric(self) -> float:
        """1 / (n (n lam + (n + 1) mu)); zero in the limit."""
        if self.is_limit:
            return 0.0
        n = self.n
        return 1.0 / (n * (n * self.lam + (n + 1) * self.mu))

    def as_dict(self) -> dict:
        return {"E": self.E, "nu": self.nu, "lambda": None if self.is_limit else self.lam, "mu": self.mu}


def build_lame(E: float, nu: float) -> MaterialParams:
    """Lame parameters from Young's modulus and Poisson ratio.

    ``nu == 0.5`` yields the limit material with ``lam = inf``.
    """
    if not E > 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not 0.0 <= nu <= 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 1/2], got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = math.inf if nu == 0.5 else E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return MaterialParams(E=float(E), nu=float(nu), lam=lam, mu=mu)


class DofMap:
    """DOF numbering for the tensor RT_k space and the vector P_k space.

    Scalar RT DOFs: edge ``e`` moment ``m`` at ``e * (k + 1) + m``, then the
    interior DOFs of cell ``c`` at ``n_edges * (k + 1) + c * k * (k + 1) + i``.
    Tensor DOF of row ``r`` is ``r * n_scalar + scalar_dof``. Displacement DOF
    of component ``comp``, cell ``c``, local ``a`` is
    ``comp * n_cells * d_P + c * d_P + a``.
    """

    def __init__(self, mesh, k: int):
        self.mesh = mesh
        self.k = k
        ref = reference_rt_basis(k)
        ne, ni = k + 1, k * (k + 1)
        self.n_scalar = mesh.n_edges * ne + mesh.n_cells * ni
        self.n_rho = DIM * self.n_scalar
        self.dim_p = (k + 1) * (k + 2) // 2
        self.n_u = DIM * mesh.n_cells * self.dim_p
        m = np.arange(ne)
        edge_dofs = (mesh.cell_edges[:, :, None] * ne + m[None, None, :]).reshape(mesh.n_cells, -1)
        interior = mesh.n_edges * ne + np.arange(mesh.n_cells)[:, None] * ni + np.arange(ni)[None, :]
        self.cell_scalar_dofs = np.hstack([edge_dofs, interior]).astype(np.int64)
        # reversing an edge flips the normal and maps L_m(s) -> (-1)^m L_m(s)
        deg = ref.edge_moment_degree()
        sign = np.ones((mesh.n_cells, ref.dim))
        edge_sign = np.repeat(mesh.edge_signs, ne, axis=1).astype(float)
        sign[:, : 3 * ne] = np.where(deg[: 3 * ne] % 2 == 0, edge_sign, 1.0)
        self.cell_signs = sign
        base = np.arange(mesh.n_cells)[:, None] * self.dim_p + np.arange(self.dim_p)[None, :]
        self.cell_u_dofs = np.hstack([base, base + mesh.n_cells * self.dim_p]).astype(np.int64)

    @cached_property
    def cell_rho_dofs(self) -> np.ndarray:
        """Tensor DOFs per cell, row 0 block then row 1 block."""
        return np.hstack([self.cell_scalar_dofs, self.cell_scalar_dofs + self.n_scalar])


@dataclass
class AssembledSystem:
    A: sps.csr_matrix
    B: sps.csr_matrix
    M: sps.csr_matrix
    c: np.ndarray
    material: MaterialParams
    mesh: object
    k: int
    dofmap: DofMap

    @property
    def n_rho(self) -> int:
        return self.dofmap.n_rho

    @property
    def n_u(self) -> int:
        return self.dofmap.n_u

    def identity_coefficients(self) -> np.ndarray:
        """Coefficients of the identity tensor field (exactly representable)."""
        return rt_interpolate(self.mesh, self.k, _identity_field, self.dofmap)


def _chunks(n):
    for start in range(0, n, CELL_CHUNK):
        yield slice(start, min(start + CELL_CHUNK, n))


def _physical_tables(mesh, k, cells, signs, degree=None):
    """Signed Piola-mapped basis values and divergences on a block of cells.

    Returns (values (nc, d_RT, nq, 2), div (nc, d_RT, nq), weights (nc, nq)).
    """
    rule, vals, div = reference_rt_basis(k).tabulate(assembly_degree(k) if degree is None else degree)
    jac = mesh.jacobians[cells]
    pv, pd = piola_map(jac, vals, div, h=mesh.cell_diameters[cells])
    sign = signs[cells]
    pv = pv * sign[:, :, None, None]
    pd = pd * sign[:, :, None]
    w = rule.weights[None, :] * np.linalg.det(jac)[:, None]
    return pv, pd, w


def _tensor_basis(pv):
    """Tensor basis values (nc, 2*d_RT, nq, 2, 2): row r of basis (r, j) is phi_j."""
    nc, nb, nq, _ = pv.shape
    T = np.zeros((nc, 2 * nb, nq, 2, 2))
    T[:, :nb, :, 0, :] = pv
    T[:, nb:, :, 1, :] = pv
    return T


def _to_csr(rows, cols, vals, shape):
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((cols, rows))
    mat = sps.coo_matrix((vals[order], (rows[order], cols[order])), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _local_triplets(dofs_r, dofs_c, local):
    nr, nc_ = dofs_r.shape[1], dofs_c.shape[1]
    rows = np.repeat(dofs_r[:, :, None], nc_, axis=2).ravel()
    cols = np.repeat(dofs_c[:, None, :], nr, axis=1).ravel()
    return rows, cols, local.ravel()


def _assemble_a(mesh, k, coef_full, coef_trace, deviatoric, dofmap=None):
    dm = dofmap or DofMap(mesh, k)
    rows, cols, vals = [], [], []
    for blk in _chunks(mesh.n_cells):
        pv, _, w = _physical_tables(mesh, k, blk, dm.cell_signs)
        T = _tensor_basis(pv)
        tr = T[..., 0, 0] + T[..., 1, 1]
        if deviatoric:
            Td = T.copy()
            Td[..., 0, 0] -= 0.5 * tr
            Td[..., 1, 1] -= 0.5 * tr
            full = np.einsum("cjqab,cq,clqab->cjl", Td, w, Td)
        else:
            full = np.einsum("cjqab,cq,clqab->cjl", T, w, T)
        trace = np.einsum("cjq,cq,clq->cjl", tr, w, tr)
        local = coef_full * full + coef_trace * trace
        local = 0.5 * (local + local.transpose(0, 2, 1))
        d = dm.cell_rho_dofs[blk]
        r, c, v = _local_triplets(d, d, local)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    return _to_csr(rows, cols, vals, (dm.n_rho, dm.n_rho))


def assemble_a_original(mesh, k: int, material: MaterialParams, dofmap=None) -> sps.csr_matrix:
    """A from (1/mu) int xi:tau - (lam+mu)/(mu(n lam+(n+1)mu)) int tr xi tr tau."""
    if material.is_limit:
        raise ValueError("original bilinear form is undefined for lambda = infinity; use assemble_a_deviatoric")
    return _assemble_a(mesh, k, 1.0 / material.mu, -material.trace_coef_original, False, dofmap)


def assemble_a_deviatoric(mesh, k: int, material: MaterialParams, dofmap=None) -> sps.csr_matrix:
    """A from (1/mu) int xi^d:tau^d + 1/(n(n lam+(n+1)mu)) int tr xi tr tau.

    In the limit material the trace term is dropped exactly.
    """
    return _assemble_a(mesh, k, 1.0 / material.mu, material.trace_coef_deviatoric, True, dofmap)


def assemble_b(mesh, k: int, dofmap=None) -> sps.csr_matrix:
    """B[(comp, cell, a), (row, j)] = int p_a * div(phi_j) for comp == row."""
    dm = dofmap or DofMap(mesh, k)
    ref = reference_rt_basis(k)
    rule, _, div_ref = ref.tabulate(assembly_degree(k))
    p_ref = reference_pk_basis(k).values(rule.xy)
    # the Jacobian cancels: w det * (p/sqrt2) * (div_ref/det)
    local_ref = np.einsum("aq,q,jq->aj", p_ref, rule.weights, div_ref) / math.sqrt(2.0)
    nb = ref.dim
    rows, cols, vals = [], [], []
    for blk in _chunks(mesh.n_cells):
        sign = dm.cell_signs[blk]
        local = local_ref[None, :, :] * sign[:, None, :]
        for r in range(DIM):
            u = dm.cell_u_dofs[blk][:, r * dm.dim_p : (r + 1) * dm.dim_p]
            t = dm.cell_rho_dofs[blk][:, r * nb : (r + 1) * nb]
            rr, cc, vv = _local_triplets(u, t, local)
            rows.append(rr)
            cols.append(cc)
            vals.append(vv)
    return _to_csr(rows, cols, vals, (dm.n_u, dm.n_rho))


def assemble_mass(mesh, k: int, dofmap=None) -> sps.csr_matrix:
    """Displacement mass matrix: diagonal with the cell area for every local DOF."""
    dm = dofmap or DofMap(mesh, k)
    diag = np.empty(dm.n_u)
    diag[dm.cell_u_dofs] = mesh.areas[:, None]
    return sps.diags(diag, format="csr")


def trace_constraint(mesh, k: int, dofmap=None) -> np.ndarray:
    """Vector c with c . x = int_Omega tr(tau_h) for the field with coefficients x."""
    dm = dofmap or DofMap(mesh, k)
    c = np.zeros(dm.n_rho)
    nb = reference_rt_basis(k).dim
    for blk in _chunks(mesh.n_cells):
        pv, _, w = _physical_tables(mesh, k, blk, dm.cell_signs)
        integ = np.einsum("cjqd,cq->cjd", pv, w)
        d = dm.cell_rho_dofs[blk]
        np.add.at(c, d[:, :nb], integ[:, :, 0])
        np.add.at(c, d[:, nb:], integ[:, :, 1])
    return c


def assemble_system(mesh, k: int, material: MaterialParams) -> AssembledSystem:
    """All blocks of the discrete mixed eigenproblem for one mesh, order and material."""
    dm = DofMap(mesh, k)
    return AssembledSystem(
        A=assemble_a_deviatoric(mesh, k, material, dm),
        B=assemble_b(mesh, k, dm),
        M=assemble_mass(mesh, k, dm),
        c=trace_constraint(mesh, k, dm),
        material=material,
        mesh=mesh,
        k=k,
        dofmap=dm,
    )


# -- interpolation and projection ---------------------------------------------


def _identity_field(x):
    return np.broadcast_to(np.eye(DIM), (len(x), DIM, DIM))


def _pullback(jac, det, vals):
    """Inverse Piola: det J^{-1} v for physical vectors v, shape (nc, nq, 2)."""
    inv = np.linalg.inv(jac)
    return np.einsum("cij,cqj->cqi", inv, vals) * det[:, None, None]


def _rt_interpolate_scalar(mesh, k, field, dm):
    """Moment interpolation of one vector field into the scalar RT_k space."""
    ne = k + 1
    coeffs = np.zeros(dm.n_scalar)
    jac = mesh.jacobians
    det = np.linalg.det(jac)
    origin = mesh.vertices[mesh.cells[:, 0]]
    ndeg = max(k + 2, (assembly_degree(k) + 2) // 2)
    s, ws = gauss_legendre_01(ndeg)
    p = mesh.vertices[mesh.cells]
    for i, (a, b) in enumerate(LOCAL_EDGES):
        pa, pb = p[:, a], p[:, b]
        length = np.linalg.norm(pb - pa, axis=1)
        t = (pb - pa) / length[:, None]
        normal = np.stack([t[:, 1], -t[:, 0]], axis=1)
        pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
        vals = field(pts.reshape(-1, 2)).reshape(mesh.n_cells, len(s), 2)
        flux = np.einsum("cqd,cd->cq", vals, normal)
        for m in range(ne):
            mom = flux @ (ws * legendre_01(m, s)) * length
            sign = dm.cell_signs[:, i * ne + m]
            coeffs[dm.cell_scalar_dofs[:, i * ne + m]] = sign * mom
    if k > 0:
        rule = quadrature(assembly_degree(k))
        xy = origin[:, None, :] + np.einsum("cij,qj->cqi", jac, rule.xy)
        vals = field(xy.reshape(-1, 2)).reshape(mesh.n_cells, len(rule), 2)
        ref_vals = _pullback(jac, det, vals)
        q = reference_pk_basis(k - 1).values(rule.xy)
        start = 3 * ne
        idx = 0
        for comp in range(DIM):
            for j in range(q.shape[0]):
                mom = ref_vals[:, :, comp] @ (rule.weights * q[j])
                coeffs[dm.cell_scalar_dofs[:, start + idx]] = mom
                idx += 1
    return coeffs


def rt_interpolate(mesh, k: int, tau, dofmap=None) -> np.ndarray:
    """RT_k interpolant of a tensor field.

    ``tau`` maps points of shape (n, 2) to tensors of shape (n, 2, 2); rows
    of the tensor are interpolated independently.
    """
    dm = dofmap or DofMap(mesh, k)
    out = np.empty(dm.n_rho)
    for r in range(DIM):
        out[r * dm.n_scalar : (r + 1) * dm.n_scalar] = _rt_interpolate_scalar(
            mesh, k, lambda x, r=r: np.asarray(tau(x))[:, r, :], dm
        )
    return out


def l2_project(mesh, k: int, v, dofmap=None) -> np.ndarray:
    """Cellwise L2 projection of a vector field onto discontinuous P_k.

    ``v`` maps points of shape (n, 2) to vectors of shape (n, 2).
    """
    dm = dofmap or DofMap(mesh, k)
    rule = quadrature(assembly_degree(k))
    p_ref = reference_pk_basis(k).values(rule.xy) / math.sqrt(2.0)
    jac = mesh.jacobians
    origin = mesh.vertices[mesh.cells[:, 0]]
    xy = origin[:, None, :] + np.einsum("cij,qj->cqi", jac, rule.xy)
    vals = np.asarray(v(xy.reshape(-1, 2))).reshape(mesh.n_cells, len(rule), 2)
    det = np.linalg.det(jac)
    # int v p_a = sum_q w_q det v p_a; M is diag(|T|) = det / 2
    mom = np.einsum("cqd,q,aq->cda", vals, rule.weights, p_ref) * det[:, None, None]
    coeffs = mom / (0.5 * det)[:, None, None]
    out = np.empty(dm.n_u)
    out[dm.cell_u_dofs[:, : dm.dim_p]] = coeffs[:, 0, :]
    out[dm.cell_u_dofs[:, dm.dim_p :]] = coeffs[:, 1, :]
    return out


# -- evaluation of discrete fields --------------------------------------------


def evaluate_rho(mesh, k: int, x, ref_points, dofmap=None):
    """Values and divergence of the tensor field ``x`` at reference points of every cell.

    Returns (values (nc, nq, 2, 2), div (nc, nq, 2)).
    """
    dm = dofmap or DofMap(mesh, k)
    ref = reference_rt_basis(k)
    vals, div = ref.values(ref_points), ref.divergence(ref_points)
    pv, pd = piola_map(mesh.jacobians, vals, div, h=mesh.cell_diameters)
    pv = pv * dm.cell_signs[:, :, None, None]
    pd = pd * dm.cell_signs[:, :, None]
    out = np.empty((mesh.n_cells, pv.shape[2], 2, 2))
    dv = np.empty((mesh.n_cells, pv.shape[2], 2))
    nb = ref.dim
    for r in range(DIM):
        coef = x[dm.cell_rho_dofs[:, r * nb : (r + 1) * nb]]
        out[:, :, r, :] = np.einsum("cj,cjqd->cqd", coef, pv)
        dv[:, :, r] = np.einsum("cj,cjq->cq", coef, pd)
    return out, dv


def evaluate_u(mesh, k: int, u, ref_points, dofmap=None) -> np.ndarray:
    """Displacement values at reference points of every cell, shape (nc, nq, 2)."""
    dm = dofmap or DofMap(mesh, k)
    p = reference_pk_basis(k).values(ref_points) / math.sqrt(2.0)
    coef = u[dm.cell_u_dofs].reshape(mesh.n_cells, DIM, dm.dim_p)
    return np.einsum("cda,aq->cqd", coef, p)


def physical_points(mesh, ref_points) -> np.ndarray:
    """Images of reference points in every cell, shape (nc, nq, 2)."""
    origin = mesh.vertices[mesh.cells[:, 0]]
    return origin[:, None, :] + np.einsum("cij,qj->cqi", mesh.jacobians, np.asarray(ref_points))


def dump_matrices(system: AssembledSystem, outdir) -> list:
    """Write A, B, M and c in MatrixMarket coordinate format (1-based)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    items = [
        ("A", sps.coo_matrix(system.A), "symmetric"),
        ("B", sps.coo_matrix(system.B), "general"),
        ("M", sps.coo_matrix(system.M), "symmetric"),
        ("c", sps.coo_matrix(system.c.reshape(-1, 1)), "general"),
    ]
    for name, mat, symmetry in items:
        path = outdir / f"{name}.mtx"
        scipy.io.mmwrite(str(path), mat, symmetry=symmetry, precision=17)
        written.append(path)
    return written

