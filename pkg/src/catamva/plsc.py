"""Partial least squares correlation between two tables sharing rows."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ca import ContributionTable, as_table, signed_contributions
from .errors import ConstantColumnWarning, EmptyModel, RowRegistryMismatch
from .gsvd import fix_signs
from .ingest import ContingencyTable

MODES = ("correlation", "covariance")


@dataclass(frozen=True, eq=False)
class LatentPair:
    rows: tuple[str, ...]
    x_labels: tuple[str, ...]
    y_labels: tuple[str, ...]
    U: np.ndarray
    V: np.ndarray
    delta: np.ndarray
    Lx: np.ndarray
    Ly: np.ndarray
    mode: str = "correlation"
    dropped_x: tuple[str, ...] = ()
    dropped_y: tuple[str, ...] = ()

    @property
    def n_dims(self) -> int:
        return int(self.delta.size)

    @property
    def is_empty(self) -> bool:
        return self.delta.size == 0

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.delta**2

    @property
    def tau(self) -> np.ndarray:
        total = np.sum(self.delta**2)
        return self.delta**2 / total if total > 0 else np.zeros_like(self.delta)


def align_rows(x: ContingencyTable, y: ContingencyTable):
    """Restrict both tables to their common rows, in ``x``'s order.

    Returns ``(x, y, removed_from_x, removed_from_y)``.
    """
    common = set(x.rows) & set(y.rows)
    order = [r for r in x.rows if r in common]
    removed_x = [r for r in x.rows if r not in common]
    removed_y = [r for r in y.rows if r not in common]
    return x.select_rows(order), y.select_rows(order), removed_x, removed_y


def preprocess_columns(cells, labels, mode: str = "correlation"):
    """Center columns (and scale them to unit norm in correlation mode).

    Constant columns cannot be scaled; they are dropped with a warning.
    Returns ``(matrix, kept_labels, dropped_labels)``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    X = np.asarray(cells, dtype=float)
    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    scale = max(1.0, np.abs(X).max(initial=0.0))
    const = norms <= 1e-12 * scale * max(1, X.shape[0])
    dropped = tuple(l for l, z in zip(labels, const) if z)
    if dropped:
        warnings.warn(f"constant columns dropped: {list(dropped)}", ConstantColumnWarning, stacklevel=3)
    Xc = Xc[:, ~const]
    if mode == "correlation":
        Xc = Xc / norms[~const]
    kept = tuple(l for l, z in zip(labels, const) if not z)
    return Xc, kept, dropped


def fit_plsc(x, y, mode: str = "correlation") -> LatentPair:
    """SVD of the cross-product ``X^T Y`` of the preprocessed tables.

    ``x`` and ``y`` must list the same rows in the same order; use
    :func:`align_rows` first when they do not.
    """
    x, y = as_table(x), as_table(y)
    if x.rows != y.rows:
        raise RowRegistryMismatch("x and y must share the same rows in the same order")
    X, xl, dx = preprocess_columns(x.cells, x.cols, mode)
    Y, yl, dy = preprocess_columns(y.cells, y.cols, mode)
    R = X.T @ Y
    floor = 1e-12 * max(R.shape + (1,)) * np.linalg.norm(X) * np.linalg.norm(Y)

    if X.shape == Y.shape and np.array_equal(X, Y):
        # self cross-product: symmetric PSD, left and right saliences coincide
        evals, evecs = np.linalg.eigh(0.5 * (R + R.T))
        order = np.argsort(evals)[::-1]
        d, U = evals[order], evecs[:, order]
        keep = d > max(1e-12 * max(R.shape) * (d[0] if d.size else 0.0), floor)
        d, U = d[keep], U[:, keep]
        U, = fix_signs(U)
        V = U
    else:
        if R.size:
            U, d, Vt = np.linalg.svd(R, full_matrices=False)
        else:
            U, d, Vt = np.zeros((R.shape[0], 0)), np.zeros(0), np.zeros((0, R.shape[1]))
        keep = d > max(1e-12 * max(R.shape + (1,)) * (d[0] if d.size else 0.0), floor)
        U, d, V = U[:, keep], d[keep], Vt[keep].T
        U, V = fix_signs(U, V)
    if d.size == 0:
        warnings.warn("cross-product is null: no latent dimensions", UserWarning, stacklevel=2)
    return LatentPair(
        rows=x.rows,
        x_labels=xl,
        y_labels=yl,
        U=U,
        V=V,
        delta=d,
        Lx=X @ U,
        Ly=Y @ V,
        mode=mode,
        dropped_x=dx,
        dropped_y=dy,
    )


def salience_contributions(pair: LatentPair, side: str = "x") -> ContributionTable:
    """Signed squared saliences; each dimension's magnitudes sum to one."""
    if pair.is_empty:
        raise EmptyModel("no latent dimensions")
    S = pair.U if side == "x" else pair.V
    labels = pair.x_labels if side == "x" else pair.y_labels
    return signed_contributions(S, np.ones(S.shape[0]), np.ones(S.shape[1]), labels)
