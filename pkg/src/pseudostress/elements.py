"""Reference-triangle Raviart-Thomas and discontinuous P_k bases.

Polynomials are stored as coefficient vectors over the monomials x^a y^b,
a + b <= degree, so values and divergences are evaluated exactly at any set
of reference points.

Reference triangle: v0 = (0, 0), v1 = (1, 0), v2 = (0, 1). Local edge i is
opposite vertex i and runs counter-clockwise from v[(i+1) % 3] to
v[(i+2) % 3]; its unit normal is the tangent rotated clockwise, which is the
outward normal.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .quadrature import gauss_legendre_01, legendre_01, quadrature

SUPPORTED_ORDERS = (0, 1, 2)
MAX_VANDERMONDE_COND = 1e8

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def _check_order(k):
    if k not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported polynomial order k={k}; expected one of {SUPPORTED_ORDERS}")


@lru_cache(maxsize=None)
def monomials(degree: int) -> tuple:
    """Exponent pairs (a, b) with a + b <= degree, graded order."""
    return tuple((d - b, b) for d in range(degree + 1) for b in range(d + 1))


def eval_monomials(degree: int, xy: np.ndarray) -> np.ndarray:
    """Monomial values, shape (n_mono, n_pts)."""
    x, y = np.asarray(xy, dtype=float).T
    return np.array([x**a * y**b for a, b in monomials(degree)])


def _monomial_integral(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@dataclass(frozen=True)
class PkBasis:
    """L2-orthonormal basis of P_k on the reference triangle.

    ``coeffs[i]`` holds the monomial coefficients of basis function i.
    """

    k: int
    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def values(self, xy) -> np.ndarray:
        """Shape (dim, n_pts)."""
        return self.coeffs @ eval_monomials(self.k, xy)


@lru_cache(maxsize=None)
def reference_pk_basis(k: int) -> PkBasis:
    """Orthonormal P_k basis via Cholesky of the exact monomial Gram matrix."""
    if k < 0 or k > max(SUPPORTED_ORDERS):
        raise ValueError(f"unsupported polynomial order k={k}")
    mono = monomials(k)
    gram = np.array([[_monomial_integral(a1 + a2, b1 + b2) for a2, b2 in mono] for a1, b1 in mono])
    L = np.linalg.cholesky(gram)
    # rows of inv(L) are Gram-Schmidt coefficients of the monomials in graded order
    coeffs = np.linalg.solve(L, np.eye(len(mono)))
    coeffs.setflags(write=False)
    return PkBasis(k=k, coeffs=coeffs)


def _rt_spanning_set(k):
    """Monomial spanning set of RT_k = (P_k)^2 + x * homogeneous P_k.

    Returns coefficients of shape (d_RT, 2, n_mono(k+1)).
    """
    mono_hi = monomials(k + 1)
    index = {m: i for i, m in enumerate(mono_hi)}
    funcs = []
    for comp in range(2):
        for m in monomials(k):
            c = np.zeros((2, len(mono_hi)))
            c[comp, index[m]] = 1.0
            funcs.append(c)
    for a, b in monomials(k):
        if a + b != k:
            continue
        c = np.zeros((2, len(mono_hi)))
        c[0, index[(a + 1, b)]] = 1.0
        c[1, index[(a, b + 1)]] = 1.0
        funcs.append(c)
    return np.array(funcs)


def _divergence_coeffs(k, vec_coeffs):
    """Divergence of vector polynomials of degree k+1; result over monomials(k)."""
    mono_hi = monomials(k + 1)
    index_lo = {m: i for i, m in enumerate(monomials(k))}
    out = np.zeros(vec_coeffs.shape[:-2] + (len(index_lo),))
    for i, (a, b) in enumerate(mono_hi):
        if a > 0:
            out[..., index_lo[(a - 1, b)]] += a * vec_coeffs[..., 0, i]
        if b > 0:
            out[..., index_lo[(a, b - 1)]] += b * vec_coeffs[..., 1, i]
    return out


def edge_geometry(vertices=REF_VERTICES):
    """Start points, edge vectors, lengths and unit normals of the local edges."""
    start = np.array([vertices[i] for i, _ in LOCAL_EDGES])
    vec = np.array([vertices[j] - vertices[i] for i, j in LOCAL_EDGES])
    length = np.linalg.norm(vec, axis=1)
    normal = np.stack([vec[:, 1], -vec[:, 0]], axis=1) / length[:, None]
    return start, vec, length, normal


def _dof_matrix(k, vec_coeffs):
    """Apply every RT_k moment functional to each vector polynomial.

    Edge DOF (i, m): integral over edge i of (phi . n) * L_m(s) ds, with L_m
    the orthonormal Legendre polynomial on [0, 1] in the counter-clockwise
    parameter. Interior DOF (comp, j): integral of phi_comp * q_j with q_j the
    orthonormal P_{k-1} basis.
    """
    start, vec, length, normal = edge_geometry()
    s, ws = gauss_legendre_01(k + 2)
    rows = []
    for i in range(3):
        pts = start[i] + s[:, None] * vec[i]
        mono = eval_monomials(k + 1, pts)
        vals = np.einsum("fcm,mq->fcq", vec_coeffs, mono)
        flux = np.einsum("fcq,c->fq", vals, normal[i])
        for m in range(k + 1):
            rows.append(flux @ (ws * legendre_01(m, s)) * length[i])
    if k > 0:
        rule = quadrature(2 * k + 1)
        mono = eval_monomials(k + 1, rule.xy)
        vals = np.einsum("fcm,mq->fcq", vec_coeffs, mono)
        q = reference_pk_basis(k - 1).values(rule.xy)
        for comp in range(2):
            for j in range(q.shape[0]):
                rows.append(vals[:, comp, :] @ (rule.weights * q[j]))
    return np.array(rows)


@dataclass(frozen=True)
class ReferenceElement:
    """Nodal (moment-dual) RT_k basis on the reference triangle.

    ``coeffs`` has shape (d_RT, 2, n_mono(k+1)); ``div_coeffs`` has shape
    (d_RT, n_mono(k)). DOFs are ordered edge-major, ``3 * (k + 1)`` edge
    moments first (edge i, Legendre degree m at index i*(k+1)+m), followed by
    the ``k * (k + 1)`` interior moments.
    """

    k: int
    coeffs: np.ndarray
    div_coeffs: np.ndarray
    vandermonde_cond: float
    _tables: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_edge_dofs(self) -> int:
        return self.k + 1

    @property
    def n_interior_dofs(self) -> int:
        return self.k * (self.k + 1)

    @property
    def dim_p(self) -> int:
        return (self.k + 1) * (self.k + 2) // 2

    def edge_moment_degree(self) -> np.ndarray:
        """Legendre degree of each DOF (-1 for interior DOFs)."""
        deg = -np.ones(self.dim, dtype=int)
        deg[: 3 * (self.k + 1)] = np.tile(np.arange(self.k + 1), 3)
        return deg

    def values(self, xy) -> np.ndarray:
        """Basis values, shape (d_RT, n_pts, 2)."""
        mono = eval_monomials(self.k + 1, xy)
        return np.einsum("fcm,mq->fqc", self.coeffs, mono)

    def divergence(self, xy) -> np.ndarray:
        """Basis divergences, shape (d_RT, n_pts)."""
        return self.div_coeffs @ eval_monomials(self.k, xy)

    def dofs(self, vec_coeffs) -> np.ndarray:
        """Apply the DOF functionals to vector polynomials of degree <= k+1."""
        return _dof_matrix(self.k, np.asarray(vec_coeffs))

    def tabulate(self, degree: int):
        """Cached (rule, values, divergences) at the rule exact to ``degree``."""
        if degree not in self._tables:
            rule = quadrature(degree)
            self._tables[degree] = (rule, self.values(rule.xy), self.divergence(rule.xy))
        return self._tables[degree]


@lru_cache(maxsize=None)
def reference_rt_basis(k: int) -> ReferenceElement:
    """Moment-dual RT_k basis by inverting the generalized Vandermonde matrix."""
    _check_order(k)
    span = _rt_spanning_set(k)
    V = _dof_matrix(k, span)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > MAX_VANDERMONDE_COND:
        raise np.linalg.LinAlgError(f"RT_{k} Vandermonde matrix is singular (cond={cond:.3e})")
    # basis_j = sum_l C[l, j] span_l with V @ C = I
    C = np.linalg.solve(V, np.eye(V.shape[0]))
    coeffs = np.einsum("lj,lcm->jcm", C, span)
    div = _divergence_coeffs(k, coeffs)
    coeffs.setflags(write=False)
    div.setflags(write=False)
    return ReferenceElement(k=k, coeffs=coeffs, div_coeffs=div, vandermonde_cond=float(cond))


def piola_map(jac, ref_values, ref_div=None, *, h=None):
    """Contravariant Piola transform of reference RT values.

    ``jac`` is a (2, 2) Jacobian or a stack (n_cells, 2, 2). ``ref_values``
    has trailing axis of length 2 and is broadcast against the cells.
    Returns physical values J v / det J and, if given, divergences
    div / det J.
    """
    jac = np.asarray(jac, dtype=float)
    det = np.linalg.det(jac)
    scale = h**2 if h is not None else np.max(np.abs(jac), axis=(-2, -1)) ** 2
    if np.any(np.abs(det) < 1e-14 * scale):
        raise ValueError("degenerate cell in Piola map")
    ref_values = np.asarray(ref_values, dtype=float)
    if jac.ndim == 2:
        vals = ref_values @ jac.T / det
        return vals if ref_div is None else (vals, np.asarray(ref_div) / det)
    vals = np.einsum("cij,...j->c...i", jac, ref_values) / det.reshape((-1,) + (1,) * (ref_values.ndim))
    if ref_div is None:
        return vals
    ref_div = np.asarray(ref_div, dtype=float)
    return vals, ref_div[None] / det.reshape((-1,) + (1,) * ref_div.ndim)
