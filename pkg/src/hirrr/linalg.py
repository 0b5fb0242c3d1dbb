"""Dense matrix kernels: Procrustes, leading eigenvectors, column-space projection."""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from .utils.error_handler import (
    ArgumentError,
    DegenerateRankWarning,
    EigenTieWarning,
    warn,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-8
EIGEN_TIE_TOL = 1e-10


def pinv_rtol(shape: Tuple[int, int]) -> float:
    """Relative singular-value cutoff max(n, p) * machine epsilon."""
    return max(shape) * np.finfo(float).eps


def pinv(X: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse with the max(n, p)*eps*sigma_max cutoff."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros((X.shape[1], X.shape[0]))
    return scipy.linalg.pinv(X, atol=0.0, rtol=pinv_rtol(X.shape))


def is_orthonormal(B: np.ndarray, tol: float = 1e-10) -> bool:
    """Check BᵀB = I within a Frobenius tolerance."""
    B = np.asarray(B, dtype=float)
    return bool(np.linalg.norm(B.T @ B - np.eye(B.shape[1])) <= tol)


def procrustes_solve(G: np.ndarray) -> np.ndarray:
    """
    Orthonormal q x r frame maximizing trace(Bᵀ G).

    Args:
        G: q x r target matrix with q >= r

    Returns:
        B = U Vᵀ from the thin SVD G = U D Vᵀ

    Raises:
        ArgumentError: If G is not 2-D or has more columns than rows
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] < G.shape[1]:
        raise ArgumentError(f"Procrustes target must be q x r with q >= r, got {G.shape}")
    U, s, Vt = scipy.linalg.svd(G, full_matrices=False, lapack_driver="gesvd")
    cutoff = pinv_rtol(G.shape) * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    if rank < G.shape[1]:
        warn(
            f"Procrustes target has rank {rank} < {G.shape[1]}; frame is not unique",
            DegenerateRankWarning,
        )
    return U @ Vt


def top_eigenvectors(M: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvectors of the r largest eigenvalues of a symmetric matrix.

    Args:
        M: q x q symmetric matrix
        r: Number of eigenvectors, 1 <= r <= q

    Returns:
        (frame, eigenvalues) with eigenvalues in descending order

    Raises:
        ArgumentError: If M is not square/symmetric or r is out of range
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ArgumentError(f"expected a square matrix, got {M.shape}")
    q = M.shape[0]
    if not 1 <= r <= q:
        raise ArgumentError(f"r must be in [1, {q}], got {r}")
    if np.max(np.abs(M - M.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise ArgumentError("matrix is not symmetric within tolerance")
    M = 0.5 * (M + M.T)

    lo = max(q - r - 1, 0)
    values, vectors = scipy.linalg.eigh(M, subset_by_index=[lo, q - 1])
    values = values[::-1]
    vectors = vectors[:, ::-1]
    if r < q and abs(values[r - 1] - values[r]) <= EIGEN_TIE_TOL * max(1.0, abs(values[0])):
        warn(
            f"eigenvalues {r} and {r + 1} tie at {values[r - 1]:.6g}; subspace is not unique",
            EigenTieWarning,
        )
    return vectors[:, :r], values[:r]


class ColumnSpaceProjector:
    """Orthogonal projector onto the column space of X.

    Stored as an orthonormal basis of the retained left singular vectors, so
    ``apply`` costs O(n k) per vector and no n x n matrix is formed.
    """

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ArgumentError(f"X must be a 2-D matrix with n >= 1, got {X.shape}")
        self.n = X.shape[0]
        if X.size == 0:
            self.basis = np.zeros((self.n, 0))
            return
        U, s, _ = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesvd")
        cutoff = pinv_rtol(X.shape) * s[0]
        keep = s > cutoff if s[0] > 0 else np.zeros_like(s, dtype=bool)
        self.basis = U[:, keep]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def apply(self, V: np.ndarray) -> np.ndarray:
        """Return P_X V for an n-vector or n x k matrix."""
        V = np.asarray(V, dtype=float)
        if V.shape[0] != self.n:
            raise ArgumentError(f"expected {self.n} rows, got {V.shape[0]}")
        return self.basis @ (self.basis.T @ V)

    def quadratic_form(self, V: np.ndarray) -> np.ndarray:
        """Return Vᵀ P_X V."""
        H = self.basis.T @ np.asarray(V, dtype=float)
        return H.T @ H

    def matrix(self) -> np.ndarray:
        """Explicit n x n projector (small problems and tests only)."""
        return self.basis @ self.basis.T


def project_columnspace(X: np.ndarray) -> ColumnSpaceProjector:
    """Projector handle for P_X = X (XᵀX)⁺ Xᵀ."""
    return ColumnSpaceProjector(X)
