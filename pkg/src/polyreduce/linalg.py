"""Rank decisions and subspace bookkeeping with a relative singular-value cut."""
from __future__ import annotations

import numpy as np

EPS_RANK = 1e-8


def rank(A, eps: float = EPS_RANK) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= eps * s[0]))


def nullspace(A, eps: float = EPS_RANK) -> np.ndarray:
    """Orthonormal basis (columns) of ker A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s >= eps * s[0]))
    return vt[r:].T.copy()


def span(V, eps: float = EPS_RANK) -> np.ndarray:
    """Orthonormal basis of the column span of V (n × r, possibly r = 0)."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[1] == 0:
        return V.reshape(V.shape[0], 0)
    u, s, _ = np.linalg.svd(V, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((V.shape[0], 0))
    r = int(np.sum(s >= eps * s[0]))
    return u[:, :r]


def subspace_sum(*spaces) -> np.ndarray:
    n = spaces[0].shape[0]
    return span(np.hstack([np.asarray(s).reshape(n, -1) for s in spaces]))


def subspace_intersection(A, B) -> np.ndarray:
    A, B = span(A), span(B)
    n = A.shape[0]
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros((n, 0))
    N = nullspace(np.hstack([A, -B]))
    return span(A @ N[: A.shape[1]])


def subspace_dim(V) -> int:
    return span(V).shape[1]


def subspace_equal(A, B) -> tuple[bool, int, int, int]:
    """Mutual containment test: dims of A, B and A + B all agree."""
    da, db = subspace_dim(A), subspace_dim(B)
    ds = subspace_dim(np.hstack([np.asarray(A).reshape(len(A), -1), np.asarray(B).reshape(len(B), -1)]))
    return (da == db == ds), da, db, ds
