"""Multiple factor analysis of contingency blocks sharing their rows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ca import as_table
from .errors import DegenerateBlock, FewerThanTwoBlocks, RowRegistryMismatch
from .gsvd import gsvd
from .ingest import ContingencyTable


@dataclass(frozen=True, eq=False)
class MFABlock:
    block_id: str
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    S: np.ndarray
    delta1: float

    @property
    def alpha(self) -> float:
        return 1.0 / self.delta1

    @property
    def weighted(self) -> np.ndarray:
        return self.alpha * self.S


@dataclass(frozen=True, eq=False)
class MFAModel:
    row_labels: tuple[str, ...]
    block_ids: tuple[str, ...]
    col_labels: tuple[tuple[str, ...], ...]
    alphas: np.ndarray
    F: np.ndarray
    partial: np.ndarray  # (K, rows, L)
    loadings: tuple[np.ndarray, ...]  # V_k per block, (J_k, L)
    eigenvalues: np.ndarray

    @property
    def n_dims(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def tau(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros_like(self.eigenvalues)


def pooled_row_masses(tables: Sequence) -> np.ndarray:
    """Average of the blocks' row-mass vectors (one common row metric).

    Each block is normalized by its own total first, so rescaling one block's
    counts leaves the shared masses unchanged.
    """
    tables = [as_table(t) for t in tables]
    masses = [t.cells.sum(axis=1) / t.n for t in tables]
    return sum(masses) / len(masses)


def preprocess_block(table, row_masses, block_id: str = "") -> MFABlock:
    """CA-style standardized residuals of one block against the shared row masses."""
    table = as_table(table)
    r = np.asarray(row_masses, dtype=float)
    if r.shape != (table.shape[0],) or np.any(r <= 0):
        raise ValueError("row masses must be positive, one per table row")
    n = table.n
    if not n > 0:
        raise DegenerateBlock(f"block {block_id!r} is empty")
    Z = table.cells / n
    c = Z.sum(axis=0)
    if np.any(c <= 0):
        raise DegenerateBlock(f"block {block_id!r} has an all-zero column")
    S = (Z - np.outer(r, c)) / np.sqrt(np.outer(r, c))
    d = np.linalg.svd(S, compute_uv=False)
    if d.size == 0 or d[0] <= 1e-12 * max(S.shape):
        raise DegenerateBlock(f"block {block_id!r} has no residual structure")
    return MFABlock(str(block_id), table.rows, table.cols, S, float(d[0]))


def fit_mfa(blocks: Sequence[MFABlock]) -> MFAModel:
    """Global analysis of ``[alpha_1 S_1 | ... | alpha_K S_K]``.

    The compromise is ``F = U Delta``; block ``k``'s partial scores are
    ``K alpha_k S_k V_k`` so that they average to the compromise.
    """
    blocks = list(blocks)
    if len(blocks) < 2:
        raise FewerThanTwoBlocks("MFA needs at least two blocks")
    rows = blocks[0].rows
    for b in blocks[1:]:
        if b.rows != rows:
            raise RowRegistryMismatch(f"block {b.block_id!r} rows differ from block {blocks[0].block_id!r}")
    K = len(blocks)
    X = np.hstack([b.weighted for b in blocks])
    dec = gsvd(X)
    U, delta, V = dec.P, dec.delta, dec.Q
    F = U * delta
    bounds = np.cumsum([0] + [b.S.shape[1] for b in blocks])
    loadings = tuple(V[bounds[k]:bounds[k + 1]] for k in range(K))
    partial = np.stack([K * b.weighted @ Vk for b, Vk in zip(blocks, loadings)])
    return MFAModel(
        row_labels=rows,
        block_ids=tuple(b.block_id for b in blocks),
        col_labels=tuple(b.cols for b in blocks),
        alphas=np.array([b.alpha for b in blocks]),
        F=F,
        partial=partial,
        loadings=loadings,
        eigenvalues=delta**2,
    )


def mfa_from_tables(tables: Sequence[ContingencyTable], block_ids: Sequence[str], transpose: bool = False) -> MFAModel:
    """Preprocess and fit per-group tables; ``transpose`` analyses the columns as rows."""
    tables = [as_table(t) for t in tables]
    if transpose:
        tables = [t.transpose() for t in tables]
    if len(tables) >= 2 and any(t.rows != tables[0].rows for t in tables[1:]):
        raise RowRegistryMismatch("blocks must share their row registry")
    r = pooled_row_masses(tables)
    return fit_mfa([preprocess_block(t, r, k) for t, k in zip(tables, block_ids)])
