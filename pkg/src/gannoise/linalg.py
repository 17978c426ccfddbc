"""Symmetric eigendecomposition by cyclic Jacobi rotations, and the PSD square root."""

import numpy as np

from .errors import ContractError, NotPSDError

PSD_TOL = 1e-6
SYMMETRY_TOL = 1e-9


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    """Eigenvalues and eigenvectors of a symmetric matrix.

    Cyclic-by-row Jacobi: each rotation zeroes one off-diagonal pair, and
    sweeps repeat until the off-diagonal Frobenius mass falls below
    ``tol * ||A||_F``.  Returns ``(w, V)`` with ``A = V diag(w) V^T`` and
    eigenvalues in ascending order.
    """
    A = np.array(a, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"need a square matrix, got shape {A.shape}")
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q]
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _check_symmetric(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"need a square matrix, got shape {A.shape}")
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * (1.0 + np.max(np.abs(A), initial=0.0)):
        raise ContractError("matrix is not symmetric")


def psd_eigenvalues(a):
    """Eigenvalues of a symmetric PSD matrix, with tiny negatives clamped to zero."""
    A = np.asarray(a, dtype=np.float64)
    _check_symmetric(A)
    w, _ = jacobi_eigh((A + A.T) / 2.0)
    return _clamp(w)


def _clamp(w):
    if w.size and w.min() < -PSD_TOL:
        raise NotPSDError(f"matrix is not PSD: eigenvalue {w.min():.3e}")
    return np.maximum(w, 0.0)


def psd_sqrt(a):
    """Symmetric PSD ``S`` with ``S @ S == A``."""
    A = np.asarray(a, dtype=np.float64)
    _check_symmetric(A)
    w, V = jacobi_eigh((A + A.T) / 2.0)
    S = (V * np.sqrt(_clamp(w))) @ V.T
    return (S + S.T) / 2.0
