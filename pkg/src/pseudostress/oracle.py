"""Brute-force dense reference implementations for testing.

Nothing here uses the reference-element tables: every cell builds its own
RT_k basis from physical monomials and physical DOF functionals, integrals
use a collapsed Gauss-Jacobi rule, and the displacement basis comes from an
exact rational Gram-Schmidt. Only mesh connectivity and the global DOF
numbering convention are shared with the sparse path.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np
import scipy.linalg
from scipy.special import roots_jacobi, roots_legendre

MAX_ASSEMBLY_DOFS = 2000
MAX_EIG_DOFS = 600


class OracleSizeError(ValueError):
    pass


@dataclass
class DenseSystem:
    A: np.ndarray
    B: np.ndarray
    M: np.ndarray
    c: np.ndarray

    @property
    def n_rho(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.M.shape[0]


def _collapsed_rule(degree):
    """Conical product rule on the reference triangle, exact to ``degree``."""
    n = degree // 2 + 1
    xi, wx = roots_jacobi(n, 1.0, 0.0)  # weight (1 - xi)
    eta, wy = roots_legendre(n)
    s = (1.0 + xi) / 2.0
    t = (1.0 + eta) / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(wx, wy) / 8.0
    pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    return pts, W.ravel()


def _mono_exps(deg):
    return [(d - b, b) for d in range(deg + 1) for b in range(d + 1)]


@lru_cache(maxsize=None)
def _orthonormal_pk(k):
    """Orthonormal P_k on the reference triangle by exact Gram-Schmidt.

    Returns a float array (dim, n_mono) of monomial coefficients.
    """
    exps = _mono_exps(k)

    def integral(e1, e2):
        a, b = e1[0] + e2[0], e1[1] + e2[1]
        return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))

    def inner(p, q):
        return sum(pi * qj * integral(exps[i], exps[j]) for i, pi in enumerate(p) for j, qj in enumerate(q) if pi and qj)

    ortho = []
    for i in range(len(exps)):
        v = [Fraction(int(j == i)) for j in range(len(exps))]
        for u in ortho:
            proj = inner(v, u) / inner(u, u)
            v = [a - proj * b for a, b in zip(v, u)]
        ortho.append(v)
    return np.array([[float(x) / sqrt(inner(u, u)) for x in u] for u in ortho])


def _eval_poly(coeffs, exps, xy):
    x, y = xy[:, 0], xy[:, 1]
    return coeffs @ np.array([x**a * y**b for a, b in exps])


def _legendre01(m, s):
    return sqrt(2 * m + 1) * np.polynomial.legendre.legval(2.0 * s - 1.0, [0] * m + [1])


def _local_basis(k, verts, edge_dirs):
    """Physical RT_k basis on one triangle, dual to the global DOF functionals.

    ``edge_dirs`` lists, for local edges 0..2 (opposite each vertex), the
    global start and end points. Returns a callable x -> values (d, nq, 2).
    """
    xc = verts.mean(axis=0)
    hT = max(np.linalg.norm(verts[i] - verts[j]) for i in range(3) for j in range(i))
    exps = _mono_exps(k)
    span = []  # (component-polynomials) as coefficient pairs over _mono_exps(k + 1)
    hi = _mono_exps(k + 1)
    idx = {e: i for i, e in enumerate(hi)}
    for comp in range(2):
        for e in exps:
            c = np.zeros((2, len(hi)))
            c[comp, idx[e]] = 1.0
            span.append(c)
    for a, b in exps:
        if a + b == k:
            c = np.zeros((2, len(hi)))
            c[0, idx[(a + 1, b)]] = 1.0
            c[1, idx[(a, b + 1)]] = 1.0
            span.append(c)
    span = np.array(span)

    def span_values(x):
        xs = (x - xc) / hT
        mono = np.array([xs[:, 0] ** a * xs[:, 1] ** b for a, b in hi])
        return np.einsum("fcm,mq->fqc", span, mono)

    def span_div(x):
        xs = (x - xc) / hT
        out = np.zeros((len(span), len(x)))
        for m, (a, b) in enumerate(hi):
            if a > 0:
                out += np.outer(span[:, 0, m] * a, xs[:, 0] ** (a - 1) * xs[:, 1] ** b) / hT
            if b > 0:
                out += np.outer(span[:, 1, m] * b, xs[:, 0] ** a * xs[:, 1] ** (b - 1)) / hT
        return out

    rows = []
    s, ws = roots_legendre(k + 3)
    s, ws = (s + 1.0) / 2.0, ws / 2.0
    for p0, p1 in edge_dirs:
        vec = p1 - p0
        length = np.linalg.norm(vec)
        normal = np.array([vec[1], -vec[0]]) / length
        pts = p0[None, :] + s[:, None] * vec[None, :]
        flux = span_values(pts) @ normal
        for m in range(k + 1):
            rows.append(flux @ (ws * _legendre01(m, s)) * length)
    if k > 0:
        J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
        Jinv = np.linalg.inv(J)
        det = np.linalg.det(J)
        ref_pts, ref_w = _collapsed_rule(2 * (k + 2))
        phys = verts[0] + ref_pts @ J.T
        pulled = np.einsum("ij,fqj->fqi", Jinv, span_values(phys))
        q = _eval_poly(_orthonormal_pk(k - 1), _mono_exps(k - 1), ref_pts)
        for comp in range(2):
            for j in range(q.shape[0]):
                rows.append(pulled[:, :, comp] @ (ref_w * det * q[j]))
    V = np.array(rows)
    C = np.linalg.inv(V)  # basis_j = sum_l C[l, j] span_l

    def values(x):
        return np.einsum("lj,lqc->jqc", C, span_values(x))

    def divergence(x):
        return C.T @ span_div(x)

    return values, divergence


def _edge_lookup(mesh):
    return {(int(a), int(b)): e for e, (a, b) in enumerate(np.sort(mesh.edges, axis=1))}


def dense_assemble(mesh, k: int, material) -> DenseSystem:
    """Dense A, B, M, c in the same DOF ordering as the sparse assembly."""
    ne, ni = k + 1, k * (k + 1)
    dim_p = (k + 1) * (k + 2) // 2
    n_edges, n_cells = len(mesh.edges), len(mesh.cells)
    n_scalar = n_edges * ne + n_cells * ni
    n_rho, n_u = 2 * n_scalar, 2 * n_cells * dim_p
    if n_rho + n_u + 1 > MAX_ASSEMBLY_DOFS:
        raise OracleSizeError(f"{n_rho + n_u + 1} DOFs exceed the oracle limit {MAX_ASSEMBLY_DOFS}")
    lookup = _edge_lookup(mesh)
    A = np.zeros((n_rho, n_rho))
    B = np.zeros((n_u, n_rho))
    M = np.zeros((n_u, n_u))
    c = np.zeros(n_rho)
    ref_pts, ref_w = _collapsed_rule(2 * (k + 2))
    pk = _orthonormal_pk(k)
    mu = material.mu
    for t, cell in enumerate(mesh.cells):
        verts = mesh.vertices[cell]
        J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
        det = np.linalg.det(J)
        edge_dirs, dofs = [], []
        for i in range(3):
            a, b = int(cell[(i + 1) % 3]), int(cell[(i + 2) % 3])
            lo, hi = min(a, b), max(a, b)
            edge_dirs.append((mesh.vertices[lo], mesh.vertices[hi]))
            e = lookup[lo, hi]
            dofs.extend(e * ne + m for m in range(ne))
        dofs.extend(n_edges * ne + t * ni + i for i in range(ni))
        dofs = np.array(dofs)
        values, divergence = _local_basis(k, verts, edge_dirs)
        x = verts[0] + ref_pts @ J.T
        w = ref_w * abs(det)
        phi, dphi = values(x), divergence(x)
        d = len(dofs)
        # tensor basis: rows 0 / 1 carry phi
        T = np.zeros((2 * d, len(x), 2, 2))
        T[:d, :, 0, :] = phi
        T[d:, :, 1, :] = phi
        tr = T[:, :, 0, 0] + T[:, :, 1, 1]
        if material.is_limit:
            Td = T - 0.5 * tr[:, :, None, None] * np.eye(2)
            loc = np.einsum("iqab,q,jqab->ij", Td, w, Td) / mu
        else:
            loc = np.einsum("iqab,q,jqab->ij", T, w, T) / mu
            loc -= material.trace_coef_original * np.einsum("iq,q,jq->ij", tr, w, tr)
        gd = np.concatenate([dofs, dofs + n_scalar])
        A[np.ix_(gd, gd)] += loc
        c[gd] += tr @ w
        p = _eval_poly(pk, _mono_exps(k), ref_pts) / sqrt(2.0)
        for r in range(2):
            ud = r * n_cells * dim_p + t * dim_p + np.arange(dim_p)
            B[np.ix_(ud, dofs + r * n_scalar)] += np.einsum("aq,q,jq->aj", p, w, dphi)
            M[np.ix_(ud, ud)] += np.einsum("aq,q,bq->ab", p, w, p)
    return DenseSystem(A=A, B=B, M=M, c=c)


def dense_pencil(system):
    A, B, M, c = (np.asarray(getattr(system, n).todense()) if hasattr(getattr(system, n), "todense")
                  else np.asarray(getattr(system, n)) for n in ("A", "B", "M", "c"))
    c = c.ravel()
    n_rho, n_u = A.shape[0], M.shape[0]
    n = n_rho + n_u + 1
    K = np.zeros((n, n))
    K[:n_rho, :n_rho] = A
    K[n_rho : n_rho + n_u, :n_rho] = B
    K[:n_rho, n_rho : n_rho + n_u] = B.T
    K[:n_rho, -1] = c
    K[-1, :n_rho] = c
    Mhat = np.zeros((n, n))
    Mhat[n_rho : n_rho + n_u, n_rho : n_rho + n_u] = -M
    return K, Mhat


def dense_eig(system, finite_tol: float = 1e-10, return_imag: bool = False):
    """All finite, real, positive eigenvalues of the bordered pencil, ascending.

    With ``return_imag`` also returns the largest relative imaginary part
    among the finite eigenvalues.
    """
    K, Mhat = dense_pencil(system)
    if K.shape[0] > MAX_EIG_DOFS:
        raise OracleSizeError(f"{K.shape[0]} DOFs exceed the dense eigen limit {MAX_EIG_DOFS}")
    ab = scipy.linalg.eigvals(K, Mhat, homogeneous_eigvals=True)
    alpha, beta = ab
    finite = np.abs(beta) > finite_tol * np.abs(alpha)
    lam = alpha[finite] / beta[finite]
    imag = float(np.max(np.abs(lam.imag) / np.maximum(np.abs(lam), 1e-300))) if lam.size else 0.0
    vals = np.sort(lam.real[lam.real > 0])
    return (vals, imag) if return_imag else vals
