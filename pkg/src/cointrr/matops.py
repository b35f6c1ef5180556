"""Dense linear-algebra kernels used throughout the package.

The one nonstandard primitive is :func:`gsym_eig`, a symmetric-definite
generalized eigensolver with a fixed ordering and sign convention, so that
every downstream quantity built from eigenvectors is reproducible bit-for-bit.
The remaining helpers (matrix square root, orthogonal complement, vec/kron/
commutation operators) are thin, contract-checked wrappers over numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient

__all__ = [
    "GenEig",
    "gsym_eig",
    "pd_sqrt",
    "orth_complement",
    "kron",
    "vec",
    "unvec",
    "commutation_matrix",
]


@dataclass(frozen=True)
class GenEig:
    """Solution of the generalized symmetric-definite eigenproblem M g = λ N g.

    Attributes
    ----------
    values : (p,) ndarray
        Eigenvalues sorted in descending order.
    vectors : (p, p) ndarray
        Eigenvectors as columns, normalized so ``vectors.T @ N @ vectors = I``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def projector(self, i: int) -> np.ndarray:
        """Rank-one (N-metric) eigen-projector g_i g_iᵀ."""
        g = self.vectors[:, i]
        return np.outer(g, g)

    def projector_sum(self, k: int) -> np.ndarray:
        """Sum of the first ``k`` eigen-projectors, Σ_{i<k} g_i g_iᵀ."""
        gk = self.vectors[:, :k]
        return gk @ gk.T


def _as_square(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return a


def _chol_pd(n: np.ndarray, pd_tol: float | None) -> np.ndarray:
    """Cholesky factor of a matrix required to be symmetric PD."""
    try:
        chol = np.linalg.cholesky(n)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite: {exc}") from exc
    # np.linalg.cholesky succeeds on some numerically semidefinite inputs;
    # enforce an explicit margin relative to the largest diagonal entry.
    tol = pd_tol if pd_tol is not None else 1e-12 * max(np.max(np.diag(n)), 1e-300)
    if np.min(np.diag(chol)) ** 2 <= tol:
        raise NotPositiveDefinite(
            f"matrix is numerically singular (pivot {np.min(np.diag(chol))**2:.3e} <= tol {tol:.3e})"
        )
    return chol


def gsym_eig(
    m: np.ndarray,
    n: np.ndarray,
    *,
    pd_tol: float | None = None,
    sym_tol: float = 1e-8,
) -> GenEig:
    """Solve M g = λ N g for symmetric PSD ``m`` and symmetric PD ``n``.

    Solved by whitening: factor N = LLᵀ, symmetric-eigendecompose L⁻¹ M L⁻ᵀ and
    map the eigenvectors back through L⁻ᵀ. Eigenvalues are returned in
    descending order (stable among ties); each eigenvector's sign is fixed so
    that its first component of largest magnitude is positive.

    Parameters
    ----------
    m : (p, p) array_like
        Symmetric (within ``sym_tol``, symmetrized internally) PSD matrix.
    n : (p, p) array_like
        Symmetric positive definite matrix.
    pd_tol : float, optional
        Definiteness margin for ``n``; defaults to ``1e-12 * max(diag(n))``.
    sym_tol : float
        Maximum tolerated relative asymmetry of ``m`` and ``n``.

    Raises
    ------
    NotPositiveDefinite
        If ``n`` fails its Cholesky factorization or the pivot tolerance.
    DimensionMismatch
        On shape disagreement or unacceptable asymmetry.
    """
    m = _as_square(m, "m")
    n = _as_square(n, "n")
    if m.shape != n.shape:
        raise DimensionMismatch(f"m has shape {m.shape} but n has shape {n.shape}")
    for name, a in (("m", m), ("n", n)):
        scale = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a - a.T)) > sym_tol * scale:
            raise DimensionMismatch(f"{name} is not symmetric within tolerance")
    m = (m + m.T) / 2.0
    n = (n + n.T) / 2.0

    chol = _chol_pd(n, pd_tol)
    # C = L⁻¹ M L⁻ᵀ, then eigendecompose the symmetrized C.
    half = solve_triangular(chol, m, lower=True)
    white = solve_triangular(chol, half.T, lower=True).T
    white = (white + white.T) / 2.0
    w, u = np.linalg.eigh(white)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    u = u[:, order]
    vectors = solve_triangular(chol.T, u, lower=False)
    # Sign convention: first component of largest magnitude made positive.
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0:
            vectors[:, j] = -col
    return GenEig(values=w, vectors=vectors)


def pd_sqrt(a: np.ndarray, *, pd_tol: float | None = None) -> np.ndarray:
    """Unique symmetric positive definite square root of a symmetric PD matrix."""
    a = _as_square(a, "a")
    a = (a + a.T) / 2.0
    w, u = np.linalg.eigh(a)
    tol = pd_tol if pd_tol is not None else 1e-12 * max(np.max(np.diag(a)), 1e-300)
    if np.min(w) <= tol:
        raise NotPositiveDefinite(f"matrix is not positive definite (min eigenvalue {np.min(w):.3e})")
    root = (u * np.sqrt(w)) @ u.T
    return (root + root.T) / 2.0


def orth_complement(a: np.ndarray, *, rank_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the column span of ``a``.

    For an n×m matrix of full column rank (m < n) returns an n×(n−m) matrix B
    with orthonormal columns and AᵀB = 0. An m = 0 input yields I_n.

    Raises
    ------
    RankDeficient
        If the columns of ``a`` are numerically dependent.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {a.shape}")
    n, m = a.shape
    if m > n:
        raise DimensionMismatch(f"need no more columns than rows, got shape {a.shape}")
    if m == 0:
        return np.eye(n)
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    tol = rank_tol if rank_tol is not None else max(n, m) * np.finfo(float).eps * s[0]
    if s.shape[0] < m or s[m - 1] <= tol:
        raise RankDeficient(f"matrix of shape {a.shape} has numerical rank < {m}")
    return u[:, m:]


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product A ⊗ B of two matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kron expects two matrices")
    return np.kron(a, b)


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: vec(A) stacks the columns of A."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch("vec expects a matrix")
    return a.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec` for the given target shape."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != rows * cols:
        raise DimensionMismatch(f"cannot reshape length-{v.shape} vector to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def commutation_matrix(k: int, l: int) -> np.ndarray:
    """Commutation matrix K with K·vec(A) = vec(Aᵀ) for every k×l matrix A.

    Also satisfies K (A⊗A) = (A⊗A) K for square A.
    """
    if k <= 0 or l <= 0:
        raise DimensionMismatch("commutation_matrix dimensions must be positive")
    out = np.zeros((k * l, k * l))
    i, j = np.meshgrid(np.arange(k), np.arange(l), indexing="ij")
    # vec(A) puts a_ij at j*k + i; vec(Aᵀ) puts it at i*l + j.
    out[(i * l + j).ravel(), (j * k + i).ravel()] = 1.0
    return out
