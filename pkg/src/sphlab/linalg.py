"""Gaussian elimination with partial pivoting for the small corrective systems."""

from __future__ import annotations

import numpy as np
from numba import njit


class SingularSystem(ArithmeticError):
    """A pivot fell below ``pivot_tolerance * max|A|``."""


@njit(cache=True)
def gauss_solve(A, B, tol):
    """Solve ``A X = B`` for square ``A`` (n x n) and ``B`` (n x m).

    Returns ``(X, ok)``.  ``ok`` is False when a pivot magnitude drops below
    ``tol * max|A|``; ``X`` is then undefined.  Inputs are not modified.
    """
    n = A.shape[0]
    m = B.shape[1]
    M = A.copy()
    X = B.copy()
    scale = 0.0
    for i in range(n):
        for j in range(n):
            v = abs(M[i, j])
            if v > scale:
                scale = v
    if scale == 0.0 or not np.isfinite(scale):
        return X, False
    thresh = tol * scale
    for k in range(n):
        p = k
        best = abs(M[k, k])
        for i in range(k + 1, n):
            v = abs(M[i, k])
            if v > best:
                best = v
                p = i
        if best < thresh or best == 0.0:
            return X, False
        if p != k:
            for j in range(n):
                t = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = t
            for j in range(m):
                t = X[k, j]
                X[k, j] = X[p, j]
                X[p, j] = t
        piv = M[k, k]
        for i in range(k + 1, n):
            lam = M[i, k] / piv
            if lam != 0.0:
                for j in range(k + 1, n):
                    M[i, j] -= lam * M[k, j]
                for j in range(m):
                    X[i, j] -= lam * X[k, j]
    for k in range(n - 1, -1, -1):
        for j in range(m):
            s = X[k, j]
            for c in range(k + 1, n):
                s -= M[k, c] * X[c, j]
            X[k, j] = s / M[k, k]
    return X, True


def solve_dense(A, b, pivot_tolerance: float = 1e-12) -> np.ndarray:
    """Solve ``A x = b`` for n in {2, 3, 6}; raises :class:`SingularSystem`."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or n not in (2, 3, 6):
        raise ValueError("A must be square with n in {2, 3, 6}")
    if b.shape[0] != n:
        raise ValueError("b has the wrong length")
    vector = b.ndim == 1
    x, ok = gauss_solve(A, b.reshape(n, -1), float(pivot_tolerance))
    if not ok:
        raise SingularSystem("matrix is singular to working tolerance")
    return x[:, 0] if vector else x
