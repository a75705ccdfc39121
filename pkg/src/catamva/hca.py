"""Agglomerative hierarchical clustering of factor scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, NonFiniteInput

LINKAGES = ("ward", "single", "complete", "average")


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge list in scipy's convention.

    Leaves are clusters ``0..n-1``; merge ``i`` creates cluster ``n + i``.
    Each merge is ``(a, b, height, size)`` with ``a < b``. For Ward linkage
    the height is ``sqrt(2 * increase in within-cluster sum of squares)``.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    labels: tuple[str, ...]
    linkage: str = "ward"

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges], dtype=float)

    def as_linkage_matrix(self) -> np.ndarray:
        """``(n-1, 4)`` array usable with :mod:`scipy.cluster.hierarchy`."""
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=float).reshape(-1, 4)


def _ward(points):
    n = points.shape[0]
    size = {i: 1 for i in range(n)}
    centroid = {i: points[i].copy() for i in range(n)}
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        ids = np.array(active)
        cent = np.array([centroid[i] for i in active])
        sz = np.array([size[i] for i in active], dtype=float)
        diff = cent[:, None, :] - cent[None, :, :]
        cost = (sz[:, None] * sz[None, :] / (sz[:, None] + sz[None, :])) * np.einsum("ijk,ijk->ij", diff, diff)
        cost[np.tril_indices(len(active))] = np.inf
        # active ids are increasing, so row-major argmin is the lexicographic tie-break
        flat = int(np.argmin(cost))
        i, j = divmod(flat, len(active))
        a, b = int(ids[i]), int(ids[j])
        new = n + step
        size[new] = size[a] + size[b]
        centroid[new] = (size[a] * centroid[a] + size[b] * centroid[b]) / size[new]
        merges.append((a, b, float(np.sqrt(2.0 * cost[i, j])), size[new]))
        active = [x for x in active if x not in (a, b)] + [new]
    return merges


def _lance_williams(points, method):
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    size = [1] * n
    D = {(i, j): dist[i, j] for i in range(n) for j in range(i + 1, n)}
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best = None
        for x in range(len(active)):
            for y in range(x + 1, len(active)):
                key = (active[x], active[y])
                if best is None or D[key] < D[best]:
                    best = key
        a, b = best
        h = D[best]
        new = n + step
        size.append(size[a] + size[b])
        for k in active:
            if k in (a, b):
                continue
            dak = D[(min(a, k), max(a, k))]
            dbk = D[(min(b, k), max(b, k))]
            if method == "single":
                d = min(dak, dbk)
            elif method == "complete":
                d = max(dak, dbk)
            else:
                d = (size[a] * dak + size[b] * dbk) / (size[a] + size[b])
            D[(k, new)] = d
        merges.append((a, b, float(h), size[new]))
        active = [x for x in active if x not in (a, b)] + [new]
    return merges


def fit_hca(points, labels=None, linkage: str = "ward") -> Dendrogram:
    """Agglomerate the rows of ``points`` (all columns are used).

    Ward linkage merges, at every step, the pair of clusters whose union
    increases the within-cluster sum of squares the least; exact ties go to
    the lexicographically smallest pair of cluster ids.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("points must be a nonempty n x d matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("points contain NaN or infinity")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    n = X.shape[0]
    labels = tuple(str(l) for l in labels) if labels is not None else tuple(str(i + 1) for i in range(n))
    if len(labels) != n:
        raise ValueError("one label per point is required")
    merges = _ward(X) if linkage == "ward" else _lance_williams(X, linkage)
    return Dendrogram(tuple(merges), labels, linkage)


def cut_tree(tree: Dendrogram, k: int) -> np.ndarray:
    """Cluster labels ``0..k-1`` after undoing the last ``k - 1`` merges.

    Clusters are numbered in order of their first leaf.
    """
    n = tree.n_leaves
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise InvalidK(f"k must be an integer in [1, {n}], got {k!r}")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    # replay the first n - k merges; rep maps a cluster id to one of its leaves
    rep = {i: i for i in range(n)}
    for step, (a, b, _, _) in enumerate(tree.merges[: n - k]):
        ra, rb = rep.pop(a), rep.pop(b)
        parent[find(rb)] = find(ra)
        rep[n + step] = ra
    out = np.empty(n, dtype=int)
    seen: dict[int, int] = {}
    for leaf in range(n):
        root = find(leaf)
        out[leaf] = seen.setdefault(root, len(seen))
    return out


def height_drops(tree: Dendrogram, max_k: int = 10) -> list[tuple[int, float]]:
    """``(k, height gap)`` pairs: the height saved by cutting into ``k`` clusters.

    A large gap at ``k`` suggests a natural cut there. Purely advisory.
    """
    h = tree.heights
    out = []
    for k in range(2, min(max_k, tree.n_leaves) + 1):
        upper = h[-(k - 1)]
        lower = h[-k] if k <= h.size else 0.0
        out.append((k, float(upper - lower)))
    return out
