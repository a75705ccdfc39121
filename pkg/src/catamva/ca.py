"""Correspondence analysis of (pseudo-)contingency tables."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTable,
    DimensionMismatch,
    EmptyModel,
    PointAtOriginWarning,
    RankZeroWarning,
    ZeroProfile,
)
from .gsvd import gsvd
from .ingest import ContingencyTable


def as_table(table) -> ContingencyTable:
    if isinstance(table, ContingencyTable):
        return table
    cells = np.asarray(table, dtype=float)
    if cells.ndim != 2:
        raise ValueError("expected a 2-D table")
    rows = [f"r{i + 1}" for i in range(cells.shape[0])]
    cols = [f"c{j + 1}" for j in range(cells.shape[1])]
    return ContingencyTable(rows, cols, cells)


def _noise_floor(I: int, J: int) -> float:
    # the weighted correspondence matrix has leading singular value 1
    return 1e-12 * max(I, J)


def _margins(cells: np.ndarray):
    n = cells.sum()
    if not n > 0:
        raise DegenerateTable("table total must be positive")
    Z = cells / n
    r = Z.sum(axis=1)
    c = Z.sum(axis=0)
    if np.any(r <= 0) or np.any(c <= 0):
        raise DegenerateTable("table has an all-zero row or column")
    return Z, r, c


def standardized_residuals(cells) -> np.ndarray:
    """``diag(1/sqrt(r)) (Z - r c^T) diag(1/sqrt(c))`` for ``Z = N / n``."""
    Z, r, c = _margins(np.asarray(cells, dtype=float))
    return (Z - np.outer(r, c)) / np.sqrt(np.outer(r, c))


def inertia_spectrum(cells) -> np.ndarray:
    """Eigenvalues of the CA of ``cells`` (same retention rule as :func:`fit_ca`)."""
    S = standardized_residuals(cells)
    d = np.linalg.svd(S, compute_uv=False)
    I, J = S.shape
    keep = d > max(1e-12 * max(I, J) * (d[0] if d.size else 0.0), _noise_floor(I, J))
    return d[keep] ** 2


@dataclass(frozen=True, eq=False)
class CAModel:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    r: np.ndarray
    c: np.ndarray
    eigenvalues: np.ndarray
    F: np.ndarray
    G: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    delta: np.ndarray
    n: float
    rank_zero: bool = False

    @property
    def n_dims(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def total_inertia(self) -> float:
        return float(self.eigenvalues.sum())

    @property
    def tau(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        if total == 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total

    def scores(self, side: str = "row") -> np.ndarray:
        return self.F if _side(side) == "row" else self.G

    def masses(self, side: str = "row") -> np.ndarray:
        return self.r if _side(side) == "row" else self.c

    def labels(self, side: str = "row") -> tuple[str, ...]:
        return self.row_labels if _side(side) == "row" else self.col_labels


def _side(side: str) -> str:
    if side in ("row", "rows"):
        return "row"
    if side in ("column", "col", "columns", "cols"):
        return "column"
    raise ValueError(f"side must be 'row' or 'column', got {side!r}")


def fit_ca(table) -> CAModel:
    """Correspondence analysis of a nonnegative table.

    Fractional cells are fine. An independence table yields a model with no
    dimensions, ``rank_zero=True`` and a :class:`RankZeroWarning`.
    """
    table = as_table(table)
    Z, r, c = _margins(table.cells)
    I, J = Z.shape
    dec = gsvd(Z - np.outer(r, c), 1.0 / r, 1.0 / c, atol=_noise_floor(I, J))
    delta = dec.delta
    F = dec.P / r[:, None] * delta
    G = dec.Q / c[:, None] * delta
    rank_zero = delta.size == 0
    if rank_zero:
        warnings.warn("table has no structure beyond independence", RankZeroWarning, stacklevel=2)
    return CAModel(
        row_labels=table.rows,
        col_labels=table.cols,
        r=r,
        c=c,
        eigenvalues=delta**2,
        F=F,
        G=G,
        P=dec.P,
        Q=dec.Q,
        delta=delta,
        n=table.n,
        rank_zero=rank_zero,
    )


def project_supplementary(model: CAModel, counts, side: str = "row") -> np.ndarray:
    """Factor scores of supplementary rows (or columns) via the transition formula.

    ``counts`` is one vector, or a matrix with one supplementary element per
    row, indexed like the opposite side of the fitted table.
    """
    side = _side(side)
    counts = np.asarray(counts, dtype=float)
    single = counts.ndim == 1
    counts = np.atleast_2d(counts)
    other = model.G if side == "row" else model.F
    if counts.shape[1] != other.shape[0]:
        raise DimensionMismatch(
            f"expected {other.shape[0]} counts per {side}, got {counts.shape[1]}"
        )
    totals = counts.sum(axis=1)
    if np.any(totals <= 0):
        raise ZeroProfile("supplementary element has an all-zero profile")
    profiles = counts / totals[:, None]
    scores = profiles @ other / model.delta
    return scores[0] if single else scores


@dataclass(frozen=True, eq=False)
class ContributionTable:
    labels: tuple[str, ...]
    signed: np.ndarray
    threshold: float

    @property
    def mask(self) -> np.ndarray:
        return np.abs(self.signed) > self.threshold


def signed_contributions(scores, weights, eigenvalues, labels=None) -> ContributionTable:
    """``sign(f) * w f^2 / lambda`` per point and dimension; threshold is 1/#points."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] == 0:
        raise EmptyModel("no dimensions to compute contributions for")
    weights = np.asarray(weights, dtype=float)
    ctr = weights[:, None] * scores**2 / np.asarray(eigenvalues, dtype=float)
    if labels is None:
        labels = [str(i + 1) for i in range(scores.shape[0])]
    return ContributionTable(tuple(labels), np.sign(scores) * ctr, 1.0 / scores.shape[0])


def contributions(model: CAModel, side: str = "row") -> ContributionTable:
    if model.n_dims == 0:
        raise EmptyModel("model has no dimensions")
    return signed_contributions(
        model.scores(side), model.masses(side), model.eigenvalues, model.labels(side)
    )


def squared_cosines(model: CAModel, side: str = "row") -> np.ndarray:
    """Share of each point's squared distance to the origin carried by each dimension."""
    if model.n_dims == 0:
        raise EmptyModel("model has no dimensions")
    f2 = model.scores(side) ** 2
    d2 = f2.sum(axis=1)
    at_origin = d2 == 0
    if at_origin.any():
        names = [lab for lab, z in zip(model.labels(side), at_origin) if z]
        warnings.warn(f"points at the origin: {names}", PointAtOriginWarning, stacklevel=2)
    out = np.zeros_like(f2)
    out[~at_origin] = f2[~at_origin] / d2[~at_origin, None]
    return out
