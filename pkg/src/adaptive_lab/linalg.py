"""Dense symmetric PSD linear algebra shared by the rest of the package.

All matrices here are small (d up to a few hundred) empirical second-moment
matrices.  The eigensolver is budget-bounded cyclic Jacobi; ridge solves go
through Cholesky on the (SPD by construction) shifted matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._kernels import jacobi_sweeps
from .errors import NonConvergence, SingularSystem

SYM_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-10


def check_symmetric(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(s, s.T):
        if np.max(np.abs(s - s.T)) > SYM_TOL * max(1.0, np.max(np.abs(s))):
            raise ValueError("matrix is not symmetric")
        s = 0.5 * (s + s.T)
    return s


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def sym_eigendecomposition(s: np.ndarray) -> EigenDecomposition:
    """Cyclic-Jacobi eigendecomposition of a symmetric matrix.

    Stops when the off-diagonal Frobenius norm falls below 1e-12 * ||S||_F;
    raises NonConvergence past a budget of 100 * dim sweeps.
    """
    s = check_symmetric(s)
    d = s.shape[0]
    a = s.copy()
    v = np.eye(d)
    fro = np.linalg.norm(s)
    tol = 1e-12 * fro
    budget = 100 * d
    jacobi_sweeps(a, v, budget, tol)
    off_part = a - np.diag(np.diag(a))
    off = float(np.linalg.norm(off_part))
    if off > tol and off > 1e-14:
        raise NonConvergence(
            f"Jacobi did not converge in {budget} sweeps (off-diag {off:.3e})"
        )
    values = np.diag(a).copy()
    order = np.argsort(values)[::-1]
    return EigenDecomposition(values=values[order], vectors=v[:, order])


def _eig_tol(s: np.ndarray) -> float:
    return 1e-10 * max(1.0, abs(float(np.trace(s))))


def ridge_solve(s: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Solve (S + lam*I) x = b by Cholesky.

    lam must be positive, or zero with S numerically nonsingular.
    """
    s = check_symmetric(s)
    b = np.asarray(b, dtype=np.float64)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0.0:
        eig = sym_eigendecomposition(s)
        if eig.values[-1] < _eig_tol(s):
            raise SingularSystem(
                f"smallest eigenvalue {eig.values[-1]:.3e} below tolerance"
            )
        shifted = s
    else:
        shifted = s + lam * np.eye(s.shape[0])
    return cho_solve(cho_factor(shifted, lower=True), b)


def pseudo_inverse_apply(
    s: np.ndarray, b: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL
) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse of a PSD matrix to a vector."""
    s = check_symmetric(s)
    b = np.asarray(b, dtype=np.float64)
    eig = sym_eigendecomposition(s)
    lam_max = eig.values[0] if eig.values.size else 0.0
    if lam_max <= 0.0:
        return np.zeros_like(b)
    cut = rank_tol * lam_max
    keep = eig.values > cut
    vecs = eig.vectors[:, keep]
    return vecs @ ((vecs.T @ b) / eig.values[keep])


def effective_dimension(s: np.ndarray, lam: float) -> float:
    """Tr((lam*I + S)^-1 S) = sum_i lam_i / (lam_i + lam)."""
    s = check_symmetric(s)
    if lam <= 0:
        raise ValueError("lam must be positive")
    values = np.clip(sym_eigendecomposition(s).values, 0.0, None)
    return float(np.sum(values / (values + lam)))


def quadratic_form(s: np.ndarray, v: np.ndarray) -> float:
    """v' S v with symmetric evaluation."""
    s = check_symmetric(s)
    v = np.asarray(v, dtype=np.float64)
    return float(v @ (s @ v))
