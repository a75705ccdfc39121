"""Generalized (metric-weighted) singular value decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, NonPositiveWeight


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``X = P diag(delta) Q.T`` with ``P.T M P = I`` and ``Q.T W Q = I``.

    ``m`` and ``w`` hold the diagonals of the row metric ``M`` and column
    metric ``W``.
    """

    P: np.ndarray
    Q: np.ndarray
    delta: np.ndarray
    m: np.ndarray
    w: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.delta.size)

    def reconstruct(self) -> np.ndarray:
        return (self.P * self.delta) @ self.Q.T


def fix_signs(left: np.ndarray, *others: np.ndarray):
    """Flip columns so each column of ``left`` has a positive largest-magnitude entry.

    The same flips are applied to every array in ``others`` (matched by
    column). Ties in magnitude resolve to the first row.
    """
    left = np.array(left, dtype=float)
    others = [np.array(o, dtype=float) for o in others]
    if left.size:
        pivot = np.argmax(np.abs(left), axis=0)
        signs = np.sign(left[pivot, np.arange(left.shape[1])])
        signs[signs == 0] = 1.0
        left *= signs
        for o in others:
            o *= signs
    return (left, *others)


def gsvd(X, m=None, w=None, tol=None, atol=0.0) -> Decomposition:
    """Generalized SVD of ``X`` under diagonal row metric ``m`` and column metric ``w``.

    Computed as the plain SVD of ``diag(sqrt(m)) X diag(sqrt(w))`` mapped back
    through ``diag(1/sqrt(m))`` and ``diag(1/sqrt(w))``. Singular values not
    exceeding ``max(tol, atol)`` are dropped; ``tol`` defaults to
    ``1e-12 * max(I, J) * delta_1``. Pass ``atol`` when the matrix has a known
    natural scale (a residual that may be pure rounding noise has no usable
    ``delta_1``).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    I, J = X.shape
    m = np.ones(I) if m is None else np.asarray(m, dtype=float)
    w = np.ones(J) if w is None else np.asarray(w, dtype=float)
    if m.shape != (I,) or w.shape != (J,):
        raise ValueError("metric lengths must match the matrix shape")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(m)) and np.all(np.isfinite(w))):
        raise NonFiniteInput("gsvd input contains NaN or infinity")
    if np.any(m <= 0) or np.any(w <= 0):
        raise NonPositiveWeight("gsvd metrics must be strictly positive")

    sm, sw = np.sqrt(m), np.sqrt(w)
    if X.size == 0:
        U, d, Vt = np.zeros((I, 0)), np.zeros(0), np.zeros((0, J))
    else:
        U, d, Vt = np.linalg.svd(sm[:, None] * X * sw[None, :], full_matrices=False)
    if tol is None:
        tol = 1e-12 * max(I, J) * (d[0] if d.size else 0.0)
    keep = d > max(tol, atol)
    U, d, V = U[:, keep], d[keep], Vt[keep].T
    P = U / sm[:, None]
    Q = V / sw[:, None]
    P, Q = fix_signs(P, Q)
    return Decomposition(P=P, Q=Q, delta=d, m=m, w=w)
