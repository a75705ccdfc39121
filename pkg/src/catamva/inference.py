"""Resampling inference: bootstrap ellipses, permutation tests, Welch t-test.

Every replicate draws from its own generator, spawned from one
``SeedSequence(seed)``. Replicate ``r`` therefore sees the same random
numbers whether replicates run serially or on a thread pool, and results are
always reduced in replicate order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .ca import CAModel, as_table, inertia_spectrum, project_supplementary
from .errors import (
    DegenerateEllipseWarning,
    DimensionOutOfRange,
    EmptyBrick,
    EmptyGroup,
    GroupTooSmall,
    RowRegistryMismatch,
    SpaceMismatch,
)
from .ingest import ResponseBrick
from .mds import MDSModel
from .plsc import fit_plsc, preprocess_columns


def replicate_generators(seed: int, B: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(B)]


def run_replicates(fn: Callable[[int, np.random.Generator], object], seed: int, B: int, n_jobs: int = 1) -> list:
    """Evaluate ``fn(r, rng_r)`` for ``r = 0..B-1`` and return results in replicate order."""
    if B < 1:
        raise ValueError("B must be at least 1")
    rngs = replicate_generators(seed, B)
    if n_jobs is None or n_jobs <= 1:
        return [fn(r, g) for r, g in enumerate(rngs)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, range(B), rngs))


# ---------------------------------------------------------------------------
# ellipses


@dataclass(frozen=True, eq=False)
class ConfidenceEllipse:
    """Covariance ellipse of a 2-D cloud, scaled by the chi-square(2) quantile."""

    center: np.ndarray
    semi_axes: np.ndarray  # major first
    angle: float  # radians, major axis measured from the first plotted dimension
    level: float = 0.95

    @property
    def degenerate(self) -> bool:
        return bool(np.min(self.semi_axes) <= 0)

    @property
    def area(self) -> float:
        return float(np.pi * self.semi_axes[0] * self.semi_axes[1])

    def contains(self, point) -> bool:
        d = np.asarray(point, dtype=float) - self.center
        ca, sa = np.cos(self.angle), np.sin(self.angle)
        u = np.array([ca * d[0] + sa * d[1], -sa * d[0] + ca * d[1]])
        total = 0.0
        for comp, a in zip(u, self.semi_axes):
            if a > 0:
                total += (comp / a) ** 2
            elif abs(comp) > 1e-12:
                return False
        return total <= 1.0


def ellipse_from_cloud(cloud, level: float = 0.95) -> ConfidenceEllipse:
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim != 2 or cloud.shape[1] != 2:
        raise ValueError("ellipses need a (B, 2) cloud")
    center = cloud.mean(axis=0)
    if cloud.shape[0] > 1:
        cov = np.cov(cloud, rowvar=False)
    else:
        cov = np.zeros((2, 2))
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    q = stats.chi2.ppf(level, 2)
    semi = np.sqrt(q * evals)
    # zero spread up to rounding counts as degenerate
    semi[semi <= 1e-12 * max(1.0, np.abs(center).max())] = 0.0
    major = evecs[:, 0]
    angle = float(np.arctan2(major[1], major[0]))
    if angle <= -np.pi / 2:
        angle += np.pi
    elif angle > np.pi / 2:
        angle -= np.pi
    return ConfidenceEllipse(center=center, semi_axes=semi, angle=angle, level=level)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True, eq=False)
class ResampleResult:
    """Replicate statistics plus their summary.

    For ``kind == "bootstrap"``, ``replicates`` has shape ``(B, groups, 2)``
    and ``ellipses`` maps each group to its confidence ellipse. For
    ``kind == "permutation"``, ``replicates`` has shape ``(B, L)`` and
    ``p_values`` has one entry per observed dimension.
    """

    kind: str
    seed: int
    B: int
    observed: np.ndarray
    replicates: np.ndarray
    labels: tuple[str, ...] = ()
    p_values: np.ndarray | None = None
    ellipses: dict = field(default_factory=dict)
    level: float | None = None
    dims: tuple[int, ...] = ()

    def significant(self, alpha: float = 0.05) -> np.ndarray:
        if self.p_values is None:
            raise ValueError("not a permutation result")
        return self.p_values < alpha


def permutation_p_values(observed, replicates) -> np.ndarray:
    """``(#{replicate >= observed} + 1) / (B + 1)`` per column."""
    observed = np.asarray(observed, dtype=float)
    replicates = np.asarray(replicates, dtype=float)
    B = replicates.shape[0]
    return ((replicates >= observed[None, :]).sum(axis=0) + 1.0) / (B + 1.0)


def _pad(x, L):
    out = np.zeros(L)
    k = min(L, x.size)
    out[:k] = x[:k]
    return out


# ---------------------------------------------------------------------------
# bootstrap


def _group_index(groups, order=None):
    groups = list(groups)
    labels = list(dict.fromkeys(groups)) if order is None else list(order)
    if not labels:
        raise EmptyGroup("no groups to resample")
    index = []
    for lab in labels:
        idx = np.array([i for i, g in enumerate(groups) if g == lab], dtype=int)
        if idx.size == 0:
            raise EmptyGroup(f"group {lab!r} has no members")
        index.append(idx)
    return labels, index


def _check_dims(dims, available):
    if len(dims) != 2:
        raise ValueError("ellipses are drawn on exactly two dimensions")
    if min(dims) < 0 or max(dims) >= available:
        raise DimensionOutOfRange(f"dimensions {dims} not available in a {available}-D space")


def _summarise_bootstrap(labels, observed, reps, seed, B, level, dims):
    ellipses = {}
    for g, lab in enumerate(labels):
        e = ellipse_from_cloud(reps[:, g, :], level)
        if e.degenerate:
            warnings.warn(f"group {lab!r}: degenerate ellipse", DegenerateEllipseWarning, stacklevel=3)
        ellipses[lab] = e
    return ResampleResult(
        kind="bootstrap", seed=seed, B=B, observed=observed, replicates=reps,
        labels=tuple(labels), ellipses=ellipses, level=level, dims=tuple(dims),
    )


def bootstrap_means(points, groups, B: int = 1000, seed: int = 0, level: float = 0.95,
                    group_order=None, n_jobs: int = 1) -> ResampleResult:
    """Bootstrap each group's mean of 2-D ``points`` by resampling members with replacement."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    if len(groups) != points.shape[0]:
        raise SpaceMismatch("one group label per point is required")
    labels, index = _group_index(groups, group_order)
    observed = np.stack([points[idx].mean(axis=0) for idx in index])

    def one(r, rng):
        out = np.empty((len(index), 2))
        for g, idx in enumerate(index):
            pick = idx[rng.integers(0, idx.size, idx.size)]
            out[g] = points[pick].mean(axis=0)
        return out

    reps = np.stack(run_replicates(one, seed, B, n_jobs))
    return _summarise_bootstrap(labels, observed, reps, seed, B, level, (0, 1))


def bootstrap_group_means(brick: ResponseBrick | None, space, groups=None, B: int = 1000,
                          seed: int = 0, level: float = 0.95, dims=(0, 1),
                          group_order=None, n_jobs: int = 1) -> ResampleResult:
    """Bootstrap confidence ellipses for group mean positions in a fitted space.

    With an :class:`MDSModel`, a group's position is the mean of its members'
    scores. With a :class:`CAModel`, it is the supplementary projection of
    the group's summed level profile (over the model's excerpts), so each
    replicate re-aggregates the resampled participants' responses. Members are
    resampled with replacement within their group.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    dims = tuple(int(d) for d in dims)
    if isinstance(space, MDSModel):
        _check_dims(dims, space.n_dims)
        if brick is not None and tuple(brick.participants) != tuple(space.labels):
            raise SpaceMismatch("brick participants do not match the MDS points")
        if groups is None:
            groups = space.groups or (brick.group if brick is not None else ())
        if len(groups) != space.scores.shape[0]:
            raise SpaceMismatch("groups must label every participant in the space")
        res = bootstrap_means(space.scores[:, list(dims)], groups, B, seed, level, group_order, n_jobs)
        return ResampleResult(
            kind=res.kind, seed=res.seed, B=res.B, observed=res.observed, replicates=res.replicates,
            labels=res.labels, ellipses=res.ellipses, level=res.level, dims=dims,
        )

    if not isinstance(space, CAModel):
        raise TypeError("space must be a fitted CAModel or MDSModel")
    if brick is None:
        raise SpaceMismatch("a CA space needs the response brick")
    _check_dims(dims, space.n_dims)
    lookup = {lab: i for i, lab in enumerate(brick.level_labels)}
    missing = [c for c in space.col_labels if c not in lookup]
    if missing:
        raise SpaceMismatch(f"brick lacks model columns: {missing[:5]}")
    ex = [i for i, e in enumerate(brick.excerpts) if e in set(space.row_labels)]
    if not ex:
        raise SpaceMismatch("brick shares no excerpts with the model")
    cols = [lookup[c] for c in space.col_labels]
    profiles = brick.values[:, ex, :][:, :, cols].sum(axis=1)  # participants x columns
    groups = brick.group if groups is None else groups
    if len(groups) != profiles.shape[0]:
        raise SpaceMismatch("groups must label every participant in the brick")
    labels, index = _group_index(groups, group_order)
    sel = list(dims)

    def position(rows):
        return project_supplementary(space, profiles[rows].sum(axis=0))[sel]

    observed = np.stack([position(idx) for idx in index])

    def one(r, rng):
        out = np.empty((len(index), 2))
        for g, idx in enumerate(index):
            out[g] = position(idx[rng.integers(0, idx.size, idx.size)])
        return out

    reps = np.stack(run_replicates(one, seed, B, n_jobs))
    return _summarise_bootstrap(labels, observed, reps, seed, B, level, dims)


# ---------------------------------------------------------------------------
# permutation tests


def _observed_table(brick: ResponseBrick):
    cells = brick.values.sum(axis=0)
    if not np.any(cells > 0):
        raise EmptyBrick("brick contains no selections")
    return cells


def shuffle_excerpts(values: np.ndarray, presented: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Permute each participant's responses across the excerpts they were presented."""
    P, E = presented.shape
    keys = np.where(presented, rng.random((P, E)), np.inf)
    source = np.argsort(keys, axis=1, kind="stable")
    slots = np.argsort(~presented, axis=1, kind="stable")
    rows = np.arange(P)[:, None]
    out = np.empty_like(values)
    out[rows, slots] = values[rows, source]
    return out


def permutation_test_eigen(brick: ResponseBrick, B: int = 1000, seed: int = 0, n_jobs: int = 1) -> ResampleResult:
    """Permutation p-value for each CA eigenvalue of the summed brick.

    Each replicate shuffles every participant's responses across the excerpts
    they heard, which keeps each participant's selections intact while
    breaking their link to specific excerpts. All-zero rows and columns are
    dropped before every fit.
    """
    cells = _observed_table(brick)
    col_keep = cells.sum(axis=0) > 0  # column totals are permutation invariant
    values = np.ascontiguousarray(brick.values[:, :, col_keep])
    presented = brick.presented

    def spectrum(table):
        table = table[table.sum(axis=1) > 0]
        if table.shape[0] < 2 or table.shape[1] < 2:
            return np.zeros(0)
        return inertia_spectrum(table)

    observed = spectrum(cells[:, col_keep])
    L = observed.size

    def one(r, rng):
        return _pad(spectrum(shuffle_excerpts(values, presented, rng).sum(axis=0)), L)

    reps = np.stack(run_replicates(one, seed, B, n_jobs)).reshape(B, L)
    return ResampleResult(
        kind="permutation", seed=seed, B=B, observed=observed, replicates=reps,
        labels=tuple(f"Dimension {l + 1}" for l in range(L)),
        p_values=permutation_p_values(observed, reps),
    )


def permutation_test_plsc(x, y, B: int = 1000, seed: int = 0, mode: str = "correlation",
                          n_jobs: int = 1) -> ResampleResult:
    """Permutation p-value for each PLSC singular value.

    Each replicate re-pairs the rows of ``y`` with those of ``x``. The
    permutation is drawn over rows sorted by label, so reordering both tables
    the same way leaves every replicate unchanged.
    """
    x, y = as_table(x), as_table(y)
    if x.rows != y.rows:
        raise RowRegistryMismatch("x and y must share the same rows in the same order")
    observed = fit_plsc(x, y, mode).delta
    L = observed.size
    # preprocessing commutes with row permutation, so do it once
    X, _, _ = preprocess_columns(x.cells, x.cols, mode)
    Y, _, _ = preprocess_columns(y.cells, y.cols, mode)
    canon = np.argsort(np.array(x.rows, dtype=object), kind="stable")
    pos = np.empty_like(canon)
    pos[canon] = np.arange(canon.size)

    def one(r, rng):
        perm = canon[rng.permutation(canon.size)][pos]
        d = np.linalg.svd(X.T @ Y[perm], compute_uv=False)
        return _pad(d, L)

    reps = np.stack(run_replicates(one, seed, B, n_jobs)).reshape(B, L)
    return ResampleResult(
        kind="permutation", seed=seed, B=B, observed=observed, replicates=reps,
        labels=tuple(f"LV {l + 1}" for l in range(L)),
        p_values=permutation_p_values(observed, reps),
    )


# ---------------------------------------------------------------------------
# Welch t-test


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    labels: tuple[str, str]
    means: tuple[float, float]
    sds: tuple[float, float]
    ns: tuple[int, int]

    def report(self) -> str:
        p = "p < .001" if self.p < 0.001 else f"p = {self.p:.3f}"
        return f"t({self.df:.2f}) = {self.t:.2f}, {p}"


def welch_t(scores, groups: Sequence[str], pair: Sequence[str] | None = None) -> WelchResult:
    """Two-sided unequal-variance t-test between two groups of scores."""
    scores = np.asarray(scores, dtype=float)
    groups = list(groups)
    if len(groups) != scores.size:
        raise ValueError("one group label per score is required")
    labels = list(dict.fromkeys(groups)) if pair is None else list(pair)
    if len(labels) != 2:
        raise ValueError(f"welch_t compares exactly two groups, got {labels}")
    a = scores[[i for i, g in enumerate(groups) if g == labels[0]]]
    b = scores[[i for i, g in enumerate(groups) if g == labels[1]]]
    if a.size < 2 or b.size < 2:
        raise GroupTooSmall("each group needs at least two members")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    sa, sb = va / a.size, vb / b.size
    diff = a.mean() - b.mean()
    se2 = sa + sb
    if se2 == 0:
        t = 0.0 if diff == 0 else float(np.copysign(np.inf, diff))
        df = float(a.size + b.size - 2)
    else:
        t = float(diff / np.sqrt(se2))
        df = float(se2**2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1)))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return WelchResult(
        t=t, df=df, p=p, labels=(labels[0], labels[1]),
        means=(float(a.mean()), float(b.mean())),
        sds=(float(np.sqrt(va)), float(np.sqrt(vb))),
        ns=(int(a.size), int(b.size)),
    )
