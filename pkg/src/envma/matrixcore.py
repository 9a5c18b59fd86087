"""Linear-algebra substrate: the complex structure J on R^{2n}, the embedding
of n x n Hermitian matrices into 2n x 2n real symmetric matrices, the trace
projection onto the J-commuting subspace, determinant-root evaluation, and a
cyclic-Jacobi eigensolver for the small symmetric matrices this package uses.

Conventions
-----------
* J = [[0, -I], [I, 0]] identifies R^{2n} with C^n via (x, y) <-> x + iy.
* A Hermitian matrix H = A + iB embeds as iota(H) = [[A, -B], [B, A]]; the
  image is exactly the J-commuting subspace of Sym(2n).
* proj(M) = (M + J^T M J) / 2 is the trace-orthogonal projection onto that
  subspace.  Each Hermitian eigenvalue of extract(proj(M)) shows up twice in
  the real spectrum of proj(M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotJCommuting, NotPositiveDefinite

# Largest supported real dimension (2n); the package targets desk-scale
# matrices, not general linear algebra.
MAX_DIM = 16

_SYM_TOL = 1e-9


def complex_structure(n: int) -> np.ndarray:
    """The canonical complex structure J on R^{2n}: J^2 = -I, J^T = -J."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def as_symmetric(m, tol: float = _SYM_TOL) -> np.ndarray:
    """Validate and symmetrize a 2n x 2n real matrix.

    Asymmetry up to `tol` in max-entry norm is silently symmetrized;
    anything beyond is rejected as malformed input.
    """
    M = np.asarray(m, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    d = M.shape[0]
    if d % 2 != 0:
        raise ValueError(f"dimension must be even (2n), got {d}")
    if d > MAX_DIM:
        raise ValueError(f"dimension {d} exceeds the supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    asym = float(np.max(np.abs(M - M.T)))
    if asym > tol:
        raise ValueError(f"matrix asymmetry {asym:g} exceeds tolerance {tol:g}")
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class HermitianMatrix:
    """n x n complex Hermitian matrix stored as real blocks H = A + iB.

    A is symmetric and B antisymmetric; both are snapped exactly on
    construction so the embedding is exact in floating point.
    """

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.real, dtype=float)
        B = np.asarray(self.imag, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ValueError(f"blocks must be square and matching, got {A.shape}, {B.shape}")
        if 2 * A.shape[0] > MAX_DIM:
            raise ValueError(f"n={A.shape[0]} exceeds the supported maximum {MAX_DIM // 2}")
        if float(np.max(np.abs(A - A.T), initial=0.0)) > _SYM_TOL:
            raise ValueError("real block is not symmetric")
        if float(np.max(np.abs(B + B.T), initial=0.0)) > _SYM_TOL:
            raise ValueError("imaginary block is not antisymmetric")
        object.__setattr__(self, "real", (A + A.T) / 2.0)
        object.__setattr__(self, "imag", (B - B.T) / 2.0)

    @property
    def n(self) -> int:
        return self.real.shape[0]


def embed(H: HermitianMatrix) -> np.ndarray:
    """iota(H): the 2n x 2n block matrix [[A, -B], [B, A]]; commutes with J."""
    A, B = H.real, H.imag
    return np.block([[A, -B], [B, A]])


def extract(M, tol: float | None = None) -> HermitianMatrix:
    """Inverse of `embed` on the J-commuting subspace.

    Raises NotJCommuting when max-entry |MJ - JM| exceeds `tol`
    (default 1e-12 relative to the largest entry of M).
    """
    M = as_symmetric(M)
    n = M.shape[0] // 2
    J = complex_structure(n)
    comm = float(np.max(np.abs(M @ J - J @ M)))
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(M))))
    if comm > tol:
        raise NotJCommuting(f"commutator norm {comm:g} exceeds tolerance {tol:g}")
    A = (M[:n, :n] + M[n:, n:]) / 2.0
    B = (M[n:, :n] - M[:n, n:]) / 2.0
    return HermitianMatrix((A + A.T) / 2.0, (B - B.T) / 2.0)


def project(M) -> np.ndarray:
    """Trace-orthogonal projection of Sym(2n) onto the J-commuting subspace."""
    M = as_symmetric(M)
    n = M.shape[0] // 2
    J = complex_structure(n)
    P = (M + J.T @ M @ J) / 2.0
    return (P + P.T) / 2.0


def jacobi_eigh(S, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a small real symmetric matrix by cyclic Jacobi.

    Returns (w, V) with eigenvalues ascending and orthonormal columns,
    S @ V = V @ diag(w).  Raises NoConvergence if the sweep budget is
    exhausted (it never is for well-formed input; Jacobi converges
    quadratically).
    """
    A = np.array(S, dtype=float, copy=True)
    m = A.shape[0]
    if m == 1:
        return A[0, :1].copy(), np.ones((1, 1))
    V = np.eye(m)
    scale = float(np.linalg.norm(A))
    if scale == 0.0:
        return np.zeros(m), V
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= 1e-15 * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                App, Aqq = A[p, p], A[q, q]
                A[p, p] = App - t * apq
                A[q, q] = Aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                idx = np.arange(m)
                idx = idx[(idx != p) & (idx != q)]
                Arp = A[idx, p].copy()
                Arq = A[idx, q].copy()
                A[idx, p] = c * Arp - s * Arq
                A[p, idx] = A[idx, p]
                A[idx, q] = s * Arp + c * Arq
                A[q, idx] = A[idx, q]
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    else:
        raise NoConvergence(f"Jacobi sweep budget ({max_sweeps}) exhausted")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def herm_eigensystem(H: HermitianMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and a unitary eigenbasis of H as real blocks.

    Works on the 2n x 2n real embedding: real eigenvalues arrive in pairs,
    and each J-invariant eigenplane span{v, Jv} yields one complex
    eigenvector z = v_top + i v_bottom.  Returns (mu, U_re, U_im) with
    H U = U diag(mu) in complex arithmetic and U unitary.
    """
    n = H.n
    if n == 1:
        return H.real[0, :1].copy(), np.ones((1, 1)), np.zeros((1, 1))
    S = embed(H)
    w, V = jacobi_eigh(S)
    J = complex_structure(n)
    mus = []
    basis = []   # selected real unit vectors, one per J-plane
    jbasis = []
    for k in range(2 * n):
        v = V[:, k].copy()
        for b, jb in zip(basis, jbasis):
            v -= (b @ v) * b
            v -= (jb @ v) * jb
        nv = float(np.linalg.norm(v))
        if nv < 0.5:
            continue
        v /= nv
        basis.append(v)
        jbasis.append(J @ v)
        mus.append(w[k])
        if len(basis) == n:
            break
    if len(basis) != n:
        raise NoConvergence("failed to split the embedded spectrum into J-planes")
    U = np.column_stack(basis)
    return np.array(mus), U[:n, :], U[n:, :]


def herm_eigenvalues(H: HermitianMatrix) -> np.ndarray:
    """The n real eigenvalues of H, ascending."""
    return herm_eigensystem(H)[0]


def hermitian_eigs_of(M) -> np.ndarray:
    """Eigenvalues (ascending) of the Hermitian part extract(proj(M))."""
    return herm_eigenvalues(extract(project(M)))


def geometric_mean(x) -> float:
    """Geometric mean of strictly positive values."""
    x = np.asarray(x, dtype=float)
    return float(np.exp(np.mean(np.log(x))))


def det_root(M) -> float:
    """det^{1/2n} of proj(M), the operator this package extends.

    Equals det_C^{1/n} of the Hermitian part.  Only defined where proj(M)
    is positive definite; raises NotPositiveDefinite otherwise.
    """
    mu = hermitian_eigs_of(M)
    if float(mu[0]) <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue of the projection is {mu[0]:g}")
    return geometric_mean(mu)


def in_theta_box(M, theta: float, tol: float = 1e-9) -> bool:
    """True iff theta*I <= proj(M) <= I/theta up to `tol` on the spectrum."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    mu = hermitian_eigs_of(M)
    return bool(mu[0] >= theta - tol and mu[-1] <= 1.0 / theta + tol)


def admissible_theta(lam: float, Lam: float) -> float:
    """The box parameter min{lambda, 1/Lambda} induced by two-sided
    eigenvalue bounds lambda*I <= proj(D^2 u) <= Lambda*I."""
    if lam <= 0.0 or Lam <= 0.0:
        raise ValueError("eigenvalue bounds must be positive")
    if lam > Lam:
        raise ValueError(f"inconsistent bounds: lambda={lam} > Lambda={Lam}")
    return min(lam, 1.0 / Lam)


def trace_inner(A, B) -> float:
    """The trace pairing tr(A B)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.einsum("ij,ji->", A, B))


def spectral_norm(A) -> float:
    """Largest absolute eigenvalue of a real symmetric matrix."""
    w, _ = jacobi_eigh(as_symmetric(A))
    return float(np.max(np.abs(w)))
