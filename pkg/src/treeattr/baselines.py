"""Classic attribution methods used for comparison.

``saabas`` is the single-ordering path attribution; ``gain``, ``split``
and ``permutation`` are the usual global importances. ``mean_abs_shap``
is the SHAP-based global importance, and ``perturbation_experiment``
measures how well a method finds each row's most negative feature.
"""

from __future__ import annotations

import numpy as np

from .attribution import Attribution
from .model import LEAF, Dataset, TreeEnsemble, check_x, expected_value, predict, predict_batch
from .treeshap import ensemble_shap, shap_matrix

GLOBAL_METHODS = ("gain", "split", "permutation", "mean-abs-shap")
INDIVIDUAL_METHODS = ("treeshap", "saabas")


def _rows(data) -> np.ndarray:
    return data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)


def saabas(ensemble: TreeEnsemble, x) -> Attribution:
    """Credit each split on the decision path with the change in node expectation."""
    x = check_x(ensemble, x)
    phi = np.zeros(ensemble.num_features)
    for tree in ensemble.trees:
        means = tree.node_means
        path = tree.decision_path(x)
        for parent, child in zip(path[:-1], path[1:]):
            phi[tree.features[parent]] += means[child] - means[parent]
    return Attribution(phi0=expected_value(ensemble), phi=phi, output=predict(ensemble, x))


def saabas_matrix(ensemble: TreeEnsemble, data) -> np.ndarray:
    rows = _rows(data)
    out = np.zeros((len(rows), ensemble.num_features))
    for i, x in enumerate(rows):
        out[i] = saabas(ensemble, x).phi
    return out


def gain_importance(ensemble: TreeEnsemble) -> np.ndarray:
    """Summed squared-error reduction of every split, per feature.

    With each leaf's points labelled exactly by the leaf value, a split's
    reduction is the between-children sum of squares
    ``r_a (mu_a - mu_j)^2 + r_b (mu_b - mu_j)^2``.
    """
    gain = np.zeros(ensemble.num_features)
    for tree in ensemble.trees:
        inner = np.flatnonzero(tree.features != LEAF)
        mu, r = tree.node_means, tree.covers
        a, b = tree.left[inner], tree.right[inner]
        g = r[a] * (mu[a] - mu[inner]) ** 2 + r[b] * (mu[b] - mu[inner]) ** 2
        np.add.at(gain, tree.features[inner], g)
    return gain


def split_count_importance(ensemble: TreeEnsemble) -> np.ndarray:
    counts = np.zeros(ensemble.num_features, dtype=np.int64)
    for tree in ensemble.trees:
        f = tree.features[tree.features != LEAF]
        counts += np.bincount(f, minlength=ensemble.num_features)
    return counts


def permutation_importance(ensemble: TreeEnsemble, data, labels, n_repeats: int = 10, seed: int = 0) -> np.ndarray:
    """Mean increase in squared error after shuffling one column at a time.

    Each feature draws its shuffles from its own child of ``SeedSequence(seed)``
    so results do not depend on evaluation order. Values can be negative.
    """
    X = _rows(data)
    y = np.asarray(labels, dtype=np.float64)
    if len(X) < 2:
        raise ValueError("permutation importance needs at least 2 rows")
    if len(y) != len(X):
        raise ValueError(f"{len(y)} labels for {len(X)} rows")
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    base = np.mean((predict_batch(ensemble, X) - y) ** 2)
    children = np.random.SeedSequence(seed).spawn(ensemble.num_features)
    out = np.zeros(ensemble.num_features)
    used = set(ensemble.used_features())
    for f in range(ensemble.num_features):
        if f not in used:
            continue
        rng = np.random.default_rng(children[f])
        losses = []
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, f] = X[rng.permutation(len(X)), f]
            losses.append(np.mean((predict_batch(ensemble, Xp) - y) ** 2))
        out[f] = np.mean(losses) - base
    return out


def mean_abs_shap(ensemble: TreeEnsemble, data, return_sum: bool = False, backend=None):
    """Per-feature mean of |phi| over rows (and the plain sum if asked)."""
    phi = shap_matrix(ensemble, data, backend=backend)
    total = np.abs(phi).sum(axis=0)
    mean = total / max(len(phi), 1)
    return (mean, total) if return_sum else mean


def global_importance(ensemble: TreeEnsemble, method: str, data=None, labels=None, seed: int = 0,
                      n_repeats: int = 10) -> np.ndarray:
    if method == "gain":
        return gain_importance(ensemble)
    if method == "split":
        return split_count_importance(ensemble).astype(np.float64)
    if data is None:
        raise ValueError(f"method {method!r} needs a dataset")
    if method == "permutation":
        if labels is None:
            labels = predict_batch(ensemble, _rows(data))
        return permutation_importance(ensemble, data, labels, n_repeats, seed)
    if method == "mean-abs-shap":
        return mean_abs_shap(ensemble, data)
    raise ValueError(f"unknown global method {method!r}; choose from {GLOBAL_METHODS}")


def rank(importance) -> np.ndarray:
    """Rank 0 = most important; ties keep the lower feature index first."""
    order = np.lexsort((np.arange(len(importance)), -np.asarray(importance, dtype=np.float64)))
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(len(order))
    return ranks


def perturbation_experiment(ensemble: TreeEnsemble, data, method: str, seed: int = 0, background=None,
                            labels=None) -> np.ndarray:
    """Cumulative output change from replacing each row's most negative feature.

    Individualized methods pick the feature with the most negative attribution
    per row (rows with no negative attribution are left alone). Global methods
    pick their top-ranked feature once for the whole dataset. The replacement
    value comes from a random ``background`` row (default: ``data``) drawn from
    a generator keyed on ``(seed, row)``.
    """
    X = _rows(data)
    if len(X) == 0:
        raise ValueError("perturbation experiment needs at least one row")
    B = X if background is None else _rows(background)
    if len(B) == 0:
        raise ValueError("background must have at least one row")
    global_pick = None
    if method in GLOBAL_METHODS:
        imp = global_importance(ensemble, method, X, labels, seed)
        global_pick = int(np.argmin(rank(imp)))
    elif method not in INDIVIDUAL_METHODS:
        raise ValueError(f"unknown method {method!r}")
    deltas = np.zeros(len(X))
    for i, x in enumerate(X):
        if global_pick is not None:
            pick = global_pick
        else:
            phi = ensemble_shap(ensemble, x).phi if method == "treeshap" else saabas(ensemble, x).phi
            pick = int(np.argmin(phi))
            if not phi[pick] < 0:
                continue
        rng = np.random.default_rng([seed, i])
        donor = B[rng.integers(len(B))]
        xp = x.copy()
        xp[pick] = donor[pick]
        deltas[i] = predict(ensemble, xp) - predict(ensemble, x)
    return np.cumsum(deltas)
