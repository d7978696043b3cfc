"""Feature rotations: append ``k`` linear combinations of the features.

Each builder returns a ``P x k`` map ``L``; the augmented design is
``[X, X @ L]``.
"""

from __future__ import annotations

import math

import numpy as np

from . import linalg

ROTATIONS = ("tbas", "pca", "random", "identity")


def n_components(p: int) -> int:
    return math.ceil(math.sqrt(p))


def tbas_map(C, k: int) -> np.ndarray:
    """Square root of ``C`` restricted to its ``k`` leading eigenvectors."""
    w, V = linalg.eig_sym(C)
    return linalg.sqrt_psd(C) @ V[:, :k]


def pca_map(X, k: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    cov = np.cov(X, rowvar=False).reshape(X.shape[1], X.shape[1])
    return linalg.eig_sym(cov)[1][:, :k]


def random_map(p: int, k: int, rng) -> np.ndarray:
    """Orthonormalized Gaussian columns."""
    q, r = np.linalg.qr(np.random.default_rng(rng).standard_normal((p, k)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def augment(X, L) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if L is None:
        return X
    return np.hstack([X, X @ L])
