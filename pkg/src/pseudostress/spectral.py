"""Shift-invert solution of the bordered saddle-point eigenproblem.

The pencil is ``K z = kappa Mhat z`` with

    K    = [[A, B^T, c], [B, 0, 0], [c^T, 0, 0]]
    Mhat = diag(0, -M, 0)

so that the second block row reads b(rho, v) = -kappa (u, v). The last
row/column is a Lagrange multiplier enforcing a zero mean trace.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem, assemble_system, build_lame

log = logging.getLogger(__name__)

CLUSTER_RTOL = 1e-6
START_SEED = 20210331
DEFAULT_SHIFT = -1.0


class EigenSolverError(RuntimeError):
    """Factorization failure, non-convergence or too few finite modes."""


@dataclass
class ArnoldiOptions:
    ncv: int | None = None
    tol: float = 0.0
    maxiter: int | None = None
    seed: int = START_SEED
    extra: int = 4


@dataclass
class PencilProblem:
    K: sps.csc_matrix
    Mhat: sps.csc_matrix
    n_rho: int
    n_u: int
    nev: int
    shift: float = DEFAULT_SHIFT
    options: ArnoldiOptions = field(default_factory=ArnoldiOptions)
    system: AssembledSystem | None = None

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def split(self, z):
        """(rho, u, multiplier) parts of a pencil vector."""
        return z[: self.n_rho], z[self.n_rho : self.n_rho + self.n_u], z[-1]


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    rho: np.ndarray  # (n_modes, n_rho)
    u: np.ndarray  # (n_modes, n_u)
    multiplier: np.ndarray
    residuals: np.ndarray
    system: AssembledSystem | None = None

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def clusters(self, rtol: float = CLUSTER_RTOL) -> list:
        """Groups of mode indices whose frequencies agree to relative gap ``rtol``."""
        return cluster_indices(self.frequencies, rtol)


def cluster_indices(values, rtol=CLUSTER_RTOL) -> list:
    values = np.asarray(values)
    groups = []
    for i, v in enumerate(values):
        if groups and abs(v - values[groups[-1][-1]]) <= rtol * abs(v):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def build_pencil(system: AssembledSystem, nev: int, shift: float = DEFAULT_SHIFT, options=None) -> PencilProblem:
    """Bordered block pencil (K, Mhat) of the discrete mixed eigenproblem."""
    A, B, M, c = system.A, system.B, system.M, system.c
    n_rho, n_u = A.shape[0], M.shape[0]
    if A.shape != (n_rho, n_rho) or B.shape != (n_u, n_rho) or M.shape != (n_u, n_u) or c.shape != (n_rho,):
        raise ValueError(
            f"block dimension mismatch: A{A.shape} B{B.shape} M{M.shape} c{c.shape}"
        )
    if nev < 1 or nev > n_u:
        raise ValueError(f"nev must lie in [1, {n_u}], got {nev}")
    cc = sps.csr_matrix(c.reshape(-1, 1))
    K = sps.bmat(
        [[A, B.T, cc], [B, None, None], [cc.T, None, None]],
        format="csc",
    )
    zr = sps.csr_matrix((n_rho, n_rho))
    Mhat = sps.block_diag([zr, -M, sps.csr_matrix((1, 1))], format="csc")
    K.sort_indices()
    Mhat.sort_indices()
    return PencilProblem(K=K, Mhat=Mhat, n_rho=n_rho, n_u=n_u, nev=nev, shift=float(shift),
                         options=options or ArnoldiOptions(), system=system)


class ShiftedSolver:
    """Direct solver for (K - shift * Mhat) z = r on the bordered pencil.

    Only a sparse matrix without the dense trace border is factorized. For a
    nonzero shift the displacement block shift*M is diagonal and is
    eliminated, leaving A - (1/shift) B^T M^{-1} B on the pseudostress DOFs;
    for a zero shift the saddle block [[A, B^T], [B, 0]] is factorized. The
    border c and, in the incompressible limit, a rank-one pin removing the
    identity-tensor kernel are restored exactly through a 2 x 2 correction.
    """

    def __init__(self, system: AssembledSystem, shift: float = DEFAULT_SHIFT):
        self.shift = float(shift)
        A, B, M, c = system.A, system.B, system.M, system.c
        self.n_rho, self.n_u = A.shape[0], M.shape[0]
        self.B = B
        self.m_diag = M.diagonal()
        n = self.n_rho + self.n_u
        if system.material.is_limit:
            # pin one DOF of the interpolated identity tensor
            ident = system.identity_coefficients()
            self.pin = int(np.argmax(np.abs(ident)))
            self.pin_scale = float(np.mean(np.abs(A.diagonal())))
        else:
            self.pin, self.pin_scale = 0, 0.0
        pin = sps.csr_matrix(([self.pin_scale], ([self.pin], [self.pin])), shape=A.shape)
        if self.shift != 0.0:
            inv_m = sps.diags(1.0 / (self.shift * self.m_diag))
            S = (A + pin - B.T @ inv_m @ B).tocsc()
            S.sort_indices()
            self._lu = self._splu(S, "MMD_AT_PLUS_A", 0.0 if self.shift < 0 else 0.1, True)
        else:
            K0 = sps.bmat([[A + pin, B.T], [B, None]], format="csc")
            K0.sort_indices()
            self._lu = self._splu(K0, "COLAMD", 1.0, False)
        chat = np.zeros(n)
        chat[: self.n_rho] = c
        e_p = np.zeros(n)
        e_p[self.pin] = 1.0
        self._chat = chat
        bd = self._solve_inner(np.stack([chat, e_p], axis=1))
        self._b, self._d = bd[:, 0], bd[:, 1]
        s_ = self.pin_scale
        self._small = np.array(
            [[1.0 - s_ * self._d[self.pin], self._b[self.pin]], [s_ * (chat @ self._d), -(chat @ self._b)]]
        )
        if abs(np.linalg.det(self._small)) <= 1e-14 * np.abs(self._small).max() ** 2:
            raise EigenSolverError("bordered system is singular; try perturbing the shift")

    @staticmethod
    def _splu(mat, ordering, thresh, symmetric):
        try:
            lu = spla.splu(mat, permc_spec=ordering, diag_pivot_thresh=thresh,
                           options=dict(SymmetricMode=symmetric))
        except RuntimeError as exc:
            raise EigenSolverError(f"factorization of K - shift*Mhat failed ({exc}); try perturbing the shift") from exc
        diag_u = np.abs(lu.U.diagonal())
        if not np.all(np.isfinite(diag_u)) or diag_u.min() <= 1e-14 * diag_u.max():
            raise EigenSolverError("K - shift*Mhat is numerically singular; try perturbing the shift")
        return lu

    def _solve_inner(self, r):
        """Solve with the unbordered, pinned operator; r has shape (n_rho + n_u, m)."""
        nr = self.n_rho
        if self.shift == 0.0:
            return self._lu.solve(np.ascontiguousarray(r))
        f, g = r[:nr], r[nr:]
        scaled = g / (self.shift * self.m_diag)[:, None]
        x = self._lu.solve(np.ascontiguousarray(f - self.B.T @ scaled))
        y = scaled - (self.B @ x) / (self.shift * self.m_diag)[:, None]
        return np.vstack([x, y])

    def solve(self, r):
        """Solve the bordered system; r has shape (n,) or (n, m) with n = n_rho + n_u + 1."""
        r = np.asarray(r, dtype=float)
        vec = r.ndim == 1
        r2 = r.reshape(len(r), -1)
        f, gm = r2[:-1], r2[-1]
        a = self._solve_inner(f)
        rhs = np.stack([a[self.pin], gm - self._chat @ a])
        xp, m = np.linalg.solve(self._small, rhs)
        x = a - self._b[:, None] * m + (self.pin_scale * xp) * self._d[:, None]
        z = np.vstack([x, m[None, :]])
        return z[:, 0] if vec else z


def start_vector(problem: PencilProblem) -> np.ndarray:
    """Deterministic Arnoldi start vector with the multiplier component zeroed."""
    rng = np.random.default_rng(problem.options.seed)
    v = rng.standard_normal(problem.size)
    v[-1] = 0.0
    return v


def solve_eigen(problem: PencilProblem) -> EigenSolution:
    """Eigenpairs of the pencil nearest the shift with kappa > shift.

    Arnoldi (ARPACK) on (K - shift Mhat)^{-1} Mhat provides a Krylov basis;
    a Rayleigh-Ritz step in the M inner product on its displacement parts
    yields real, M-orthonormal eigenvectors. Ritz values nu map back to
    kappa = shift + 1/nu; nu near zero are infinite eigenvalues of the
    singular Mhat and are discarded.
    """
    P = problem
    opts = P.options
    if P.system is None:
        raise ValueError("pencil carries no assembled system to factorize")
    solver = ShiftedSolver(P.system, P.shift)
    Mhat = P.Mhat
    n = P.size

    op = spla.LinearOperator((n, n), matvec=lambda x: solver.solve(np.asarray(Mhat @ x).ravel()), dtype=float)
    nreq = min(P.nev + opts.extra, P.n_u, n - 2)
    ncv = opts.ncv or min(n - 1, max(2 * nreq + 1, 20))
    try:
        vals, vecs = spla.eigs(op, k=nreq, which="LM", v0=start_vector(P), ncv=ncv, tol=opts.tol,
                               maxiter=opts.maxiter)
    except spla.ArpackNoConvergence as exc:
        raise EigenSolverError(f"Arnoldi did not converge: {exc}") from exc

    M = P.system.M
    nu_scale = max(np.abs(vals).max(), 1e-300)
    keep = np.abs(vals) >= 1e-10 * nu_scale
    if not keep.any():
        raise EigenSolverError("no finite eigenvalues found")
    U = vecs[P.n_rho : P.n_rho + P.n_u, keep]
    return _rayleigh_ritz(P, solver, M, np.hstack([U.real, U.imag]))


def _solve_u(P, solver, M, basis):
    """(K - theta Mhat)^{-1} [0; -M u; 0] for each column u of ``basis``."""
    rhs = np.zeros((P.size, basis.shape[1]))
    rhs[P.n_rho : P.n_rho + P.n_u] = -(M @ basis)
    return solver.solve(rhs)


def _rayleigh_ritz(P, solver, M, U):
    theta = P.shift
    # M-orthonormal basis of the Krylov displacement parts, rank-revealing
    G = U.T @ (M @ U)
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    good = w > 1e-12 * w.max()
    Q = U @ (V[:, good] / np.sqrt(w[good]))
    Z = _solve_u(P, solver, M, Q)
    W = Z[P.n_rho : P.n_rho + P.n_u]
    H = Q.T @ (M @ W)
    ritz, Y = scipy.linalg.eigh(0.5 * (H + H.T))
    nu_scale = np.abs(ritz).max()
    valid = (ritz > 1e-10 * nu_scale)
    if not valid.any():
        raise EigenSolverError("no finite eigenvalues above the shift")
    kappa = theta + 1.0 / ritz[valid]
    Y = Y[:, valid]
    order = np.argsort(kappa, kind="stable")
    kappa, Y = kappa[order], Y[:, order]

    nev = P.nev
    if len(kappa) < nev:
        raise EigenSolverError(f"only {len(kappa)} finite modes found, {nev} requested")
    # keep whole clusters at the cut
    n_out = nev
    while n_out < len(kappa) and abs(np.sqrt(kappa[n_out]) - np.sqrt(kappa[n_out - 1])) <= CLUSTER_RTOL * np.sqrt(kappa[n_out]):
        n_out += 1
    kappa, Y = kappa[:n_out], Y[:, :n_out]

    u = Q @ Y
    # z = (kappa - theta) * (K - theta Mhat)^{-1} [0; -M u; 0]
    z = Z @ Y * (kappa - theta)[None, :]
    z[P.n_rho : P.n_rho + P.n_u] = u
    for j in range(n_out):
        idx = np.argmax(np.abs(u[:, j]))
        if u[idx, j] < 0:
            z[:, j] *= -1.0
    resid = np.linalg.norm(P.K @ z - (P.Mhat @ z) * kappa[None, :], axis=0)
    rho, uu, mult = z[: P.n_rho].T, z[P.n_rho : P.n_rho + P.n_u].T, z[-1]
    return EigenSolution(
        eigenvalues=kappa,
        rho=np.ascontiguousarray(rho),
        u=np.ascontiguousarray(uu),
        multiplier=mult.copy(),
        residuals=resid,
        system=P.system,
    )


def solve_system(system: AssembledSystem, nev: int, shift: float = DEFAULT_SHIFT, options=None) -> EigenSolution:
    return solve_eigen(build_pencil(system, nev, shift, options))


def solve_limit_eigen(mesh, k: int, mu: float, nev: int, shift: float = DEFAULT_SHIFT) -> EigenSolution:
    """Incompressible-limit eigenproblem (trace term of a(.,.) dropped)."""
    E = 3.0 * mu  # nu = 1/2 gives mu = E / 3
    material = build_lame(E, 0.5)
    return solve_system(assemble_system(mesh, k, material), nev, shift)


def solve(mesh, k: int, material, nev: int, shift: float = DEFAULT_SHIFT) -> EigenSolution:
    """Assemble and solve; dispatches to the limit pipeline for nu = 1/2."""
    if material.is_limit:
        return solve_limit_eigen(mesh, k, material.mu, nev, shift)
    return solve_system(assemble_system(mesh, k, material), nev, shift)
