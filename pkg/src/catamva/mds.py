"""Classical (Torgerson) metric multidimensional scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricInput, NegativeDistance, NonFiniteInput
from .gsvd import fix_signs
from .ingest import CoOccurrenceMatrix


@dataclass(frozen=True, eq=False)
class MDSModel:
    scores: np.ndarray
    eigenvalues: np.ndarray
    negative_mass: float
    labels: tuple[str, ...]
    groups: tuple[str, ...] = ()

    @property
    def n_dims(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def tau(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros_like(self.eigenvalues)


def cooccurrence_to_sq_distances(C) -> np.ndarray:
    """``d2[p, q] = C[p, p] + C[q, q] - 2 C[p, q]`` (counts treated as inner products)."""
    C = np.asarray(C, dtype=float)
    d = np.diag(C)
    return d[:, None] + d[None, :] - 2.0 * C


def double_center(D2) -> np.ndarray:
    D2 = np.asarray(D2, dtype=float)
    row = D2.mean(axis=1, keepdims=True)
    col = D2.mean(axis=0, keepdims=True)
    return -0.5 * (D2 - row - col + D2.mean())


def fit_mds(data, tol: float = 1e-10, labels=None, groups=None, atol: float = 1e-12) -> MDSModel:
    """Metric MDS of a distance matrix or a :class:`CoOccurrenceMatrix`.

    Eigenvalues above ``tol * lambda_1`` are kept; the summed magnitude of the
    negative eigenvalues is stored as ``negative_mass`` (zero for Euclidean
    input). ``atol`` guards against rounding noise when every eigenvalue
    vanishes.
    """
    if isinstance(data, CoOccurrenceMatrix):
        C = data.cells
        if not np.allclose(C, C.T, rtol=0, atol=1e-12 * max(1.0, np.abs(C).max(initial=0))):
            raise AsymmetricInput("co-occurrence matrix is not symmetric")
        D2 = np.maximum(cooccurrence_to_sq_distances(C), 0.0)
        labels = data.participants if labels is None else labels
        groups = data.group if groups is None else groups
    else:
        D = np.asarray(data, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise AsymmetricInput("distance matrix must be square")
        if not np.all(np.isfinite(D)):
            raise NonFiniteInput("distance matrix contains NaN or infinity")
        if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, np.abs(D).max(initial=0))):
            raise AsymmetricInput("distance matrix is not symmetric")
        if np.any(D < 0):
            raise NegativeDistance("distances must be nonnegative")
        if np.any(np.diag(D) != 0):
            raise NegativeDistance("distance matrix must have a zero diagonal")
        D2 = D**2
    n = D2.shape[0]
    labels = tuple(str(x) for x in labels) if labels is not None else tuple(str(i + 1) for i in range(n))
    groups = tuple(groups) if groups is not None else ()

    B = double_center(D2)
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = evals[0] if n else 0.0
    keep = evals > max(tol * top, atol * max(1.0, np.abs(B).max(initial=0)))
    negative_mass = float(-evals[evals < 0].sum())
    lam = evals[keep]
    V, = fix_signs(evecs[:, keep])
    scores = V * np.sqrt(lam)
    return MDSModel(scores=scores, eigenvalues=lam, negative_mass=negative_mass,
                    labels=labels, groups=groups)


def group_means(scores, groups) -> dict[str, np.ndarray]:
    """Arithmetic mean score per group label (first-appearance order)."""
    scores = np.asarray(scores, dtype=float)
    groups = list(groups)
    if len(groups) != scores.shape[0]:
        raise ValueError("one group label per point is required")
    out = {}
    for g in dict.fromkeys(groups):
        idx = [i for i, x in enumerate(groups) if x == g]
        out[g] = scores[idx].mean(axis=0)
    return out
