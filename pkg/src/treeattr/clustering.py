"""Supervised clustering: agglomerative clustering of attribution vectors.

Cluster ids follow the usual convention: leaves are ``0..n-1`` and the
cluster created by merge ``k`` is ``n + k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import saabas_matrix
from .model import Dataset, TreeEnsemble, predict_batch
from .treeshap import shap_matrix

LINKAGES = ("ward", "complete", "average")
MAX_ROWS = 10_000


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class MergeTree:
    merges: tuple[Merge, ...]
    n: int

    def as_array(self) -> np.ndarray:
        """(n-1) x 4 array in the familiar linkage-matrix layout."""
        return np.array([[m.a, m.b, m.height, m.size] for m in self.merges], dtype=np.float64).reshape(-1, 4)

    def labels(self, n_groups: int) -> np.ndarray:
        """Group label per leaf after applying the first ``n - n_groups`` merges."""
        if not 1 <= n_groups <= self.n:
            raise ValueError(f"n_groups must lie in [1, {self.n}]")
        parent = np.arange(2 * self.n - 1)
        for k, m in enumerate(self.merges[: self.n - n_groups]):
            parent[m.a] = parent[m.b] = self.n + k

        def root(i):
            while parent[i] != i:
                i = parent[i]
            return i

        roots = np.array([root(i) for i in range(self.n)])
        _, labels = np.unique(roots, return_inverse=True)
        return labels


class DegenerateInput(ValueError):
    pass


def _pairwise_distances(X: np.ndarray, block: int = 256) -> np.ndarray:
    n = X.shape[0]
    D = np.empty((n, n))
    for lo in range(0, n, block):
        diff = X[lo : lo + block, None, :] - X[None, :, :]
        D[lo : lo + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return D


def cluster_attributions(attribs, linkage: str = "ward") -> MergeTree:
    """Agglomerative clustering under Euclidean distance.

    Each step merges the closest pair of active clusters; on ties the pair
    whose smaller slot index is lowest wins, then the lower partner index.
    Distances are updated with the Lance-Williams formulas.
    """
    X = np.asarray(attribs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateInput("need at least 2 rows to cluster")
    if not np.all(np.isfinite(X)):
        raise DegenerateInput("attribution matrix contains non-finite entries")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    n = X.shape[0]
    if n > MAX_ROWS:
        raise DegenerateInput(f"{n} rows exceeds the supported maximum of {MAX_ROWS}")
    D = _pairwise_distances(X)
    np.fill_diagonal(D, np.inf)

    size = np.ones(n)
    ids = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = []
    for k in range(n - 1):
        # D is symmetric, so the first row-major minimum has i < j
        i, j = divmod(int(np.argmin(D)), n)
        h = D[i, j]
        ni, nj = size[i], size[j]
        dik, djk = D[i], D[j]
        if linkage == "ward":
            nk = size
            new = np.sqrt(np.maximum(((ni + nk) * dik**2 + (nj + nk) * djk**2 - nk * h**2) / (ni + nj + nk), 0.0))
        elif linkage == "complete":
            new = np.maximum(dik, djk)
        else:
            new = (ni * dik + nj * djk) / (ni + nj)
        a, b = sorted((int(ids[i]), int(ids[j])))
        merges.append(Merge(a, b, float(h), int(ni + nj)))
        # merged cluster lives in slot i; slot j retires
        active[j] = False
        new[~active] = np.inf
        new[i] = np.inf
        D[i, :] = new
        D[:, i] = new
        D[j, :] = np.inf
        D[:, j] = np.inf
        size[i] = ni + nj
        ids[i] = n + k
    return MergeTree(tuple(merges), n)


@dataclass(frozen=True)
class R2Curve:
    groups: np.ndarray
    r2: np.ndarray
    flagged: bool

    def area(self) -> float:
        """Mean R^2 over all group counts (higher is better)."""
        return float(np.mean(self.r2))


def r2_curve(tree: MergeTree, outputs) -> R2Curve:
    """R^2 of predicting each row by its group's mean output, for g = n..1 groups.

    Merging groups A and B raises the within-group squared error by
    ``n_A n_B / (n_A + n_B) * (mean_A - mean_B)^2``, so the curve is built
    incrementally. With zero output variance the curve is defined as 1 for
    g > 1 (and 0 at g = 1) and ``flagged`` is set.
    """
    y = np.asarray(outputs, dtype=np.float64)
    n = tree.n
    if y.shape != (n,):
        raise ValueError(f"expected {n} outputs, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("outputs must be finite")
    sst = float(np.sum((y - y.mean()) ** 2))
    groups = np.arange(n, 0, -1)
    r2 = np.empty(n)
    if sst == 0.0:
        r2[:] = 1.0
        r2[-1] = 0.0
        return R2Curve(groups, r2, True)
    count = np.concatenate([np.ones(n), np.zeros(n - 1)])
    mean = np.concatenate([y, np.zeros(n - 1)])
    sse = 0.0
    r2[0] = 1.0
    for k, m in enumerate(tree.merges):
        na, nb = count[m.a], count[m.b]
        sse += na * nb / (na + nb) * (mean[m.a] - mean[m.b]) ** 2
        count[n + k] = na + nb
        mean[n + k] = (na * mean[m.a] + nb * mean[m.b]) / (na + nb)
        r2[k + 1] = 1.0 - sse / sst
    r2[-1] = 0.0
    return R2Curve(groups, r2, False)


def leaf_order(tree: MergeTree) -> np.ndarray:
    """Leaves in dendrogram order (left child = lower cluster id)."""
    n = tree.n
    if n == 1:
        return np.array([0])
    out = []
    stack = [n + len(tree.merges) - 1]
    while stack:
        c = stack.pop()
        if c < n:
            out.append(c)
        else:
            m = tree.merges[c - n]
            stack.append(m.b)
            stack.append(m.a)
    return np.array(out, dtype=np.int64)


def compare_supervised_clusterings(ensemble: TreeEnsemble, data: Dataset | np.ndarray,
                                   methods=("treeshap", "saabas"), linkage: str = "ward") -> dict:
    """R^2 merge curves from clustering each method's attributions."""
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    outputs = predict_batch(ensemble, rows)
    result = {}
    for method in methods:
        if method == "treeshap":
            attribs = shap_matrix(ensemble, rows)
        elif method == "saabas":
            attribs = saabas_matrix(ensemble, rows)
        else:
            raise ValueError(f"unknown attribution method {method!r}")
        tree = cluster_attributions(attribs, linkage)
        result[method] = r2_curve(tree, outputs)
    return result
