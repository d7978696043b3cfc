"""Small dense symmetric linear algebra: Jacobi eigensolver, PSD square
root and principal angles."""

from __future__ import annotations

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
PSD_TOL = 1e-10
ORTHONORMAL_TOL = 1e-8


def symmetric(a) -> np.ndarray:
    """Copy of ``a`` with the upper triangle mirrored onto the lower one."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def eig_sym(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.

    Row-cyclic Jacobi rotations until the largest off-diagonal entry is
    below ``JACOBI_TOL * max|a|``. Each eigenvector is signed so that its
    largest-magnitude entry is positive.
    """
    A = symmetric(a)
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    V = np.eye(n)
    scale = np.abs(A).max()
    if n > 1 and scale > 0:
        tol = JACOBI_TOL * scale
        for _ in range(JACOBI_MAX_SWEEPS):
            off = np.abs(A - np.diag(np.diag(A))).max()
            if off <= tol:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if abs(apq) <= tol * 1e-3:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    # A <- J^T A J with J the (p, q) rotation
                    rp, rq = A[p].copy(), A[q].copy()
                    A[p], A[q] = c * rp - s * rq, s * rp + c * rq
                    cp, cq = A[:, p].copy(), A[:, q].copy()
                    A[:, p], A[:, q] = c * cp - s * cq, s * cp + c * cq
                    A[p, q] = A[q, p] = 0.0
                    vp, vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    big = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[big, np.arange(n)] < 0, -1.0, 1.0)
    return w, V * signs


def sqrt_psd(a) -> np.ndarray:
    """Symmetric square root of a (numerically) PSD matrix."""
    A = symmetric(a)
    w, V = eig_sym(A)
    scale = np.abs(A).max()
    if w.size and w[-1] < -PSD_TOL * scale:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w[-1]:.3e})")
    # eigenvalues inside rounding noise of zero are zero; their square roots would not be small
    noise = w.size * np.finfo(float).eps * scale
    L = (V * np.sqrt(np.where(w > noise, w, 0.0))) @ V.T
    return symmetric(L)


def _basis(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u.reshape(-1, 1) if u.ndim == 1 else u


def principal_angle(u, v) -> float:
    """Largest principal angle between the spans of two orthonormal bases."""
    U, W = _basis(u), _basis(v)
    if U.shape != W.shape:
        raise ValueError(f"basis shapes differ: {U.shape} vs {W.shape}")
    d = U.shape[1]
    for B in (U, W):
        if np.abs(B.T @ B - np.eye(d)).max() > ORTHONORMAL_TOL:
            raise ValueError("basis is not orthonormal")
    M = U.T @ W
    if d == 1:
        smin = abs(M[0, 0])
    else:
        smin = np.sqrt(max(eig_sym(M.T @ M)[0][-1], 0.0))
    return float(np.arccos(np.clip(smin, 0.0, 1.0)))


def vector_angle(g, h) -> float:
    """Angle in [0, pi] between two vectors; pi/2 if either is zero."""
    g, h = np.asarray(g, dtype=float), np.asarray(h, dtype=float)
    ng, nh = np.linalg.norm(g), np.linalg.norm(h)
    if ng == 0 or nh == 0:
        return float(np.pi / 2)
    return float(np.arccos(np.clip(g @ h / (ng * nh), -1.0, 1.0)))
