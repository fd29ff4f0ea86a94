"""Exponential-time ground truth by direct subset enumeration.

Everything here is deliberately independent of the path-weight recursion in
:mod:`treeattr.treeshap`: conditional expectations come from the plain
cover-weighted tree walk and Shapley sums are formed subset by subset.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .attribution import Attribution, InteractionMatrix
from .model import LEAF, Tree, TreeEnsemble, check_x, predict

DEFAULT_CAP = 20


class TooManyFeatures(ValueError):
    pass


def exp_value(tree: Tree, x, S: Iterable[int]) -> float:
    """E[f(x) | x_S] for one tree, using node covers for unconditioned splits.

    Features in ``S`` follow the decision path; any other split sends each
    child its cover share of the weight. The result is the weighted sum of
    the leaves reached.
    """
    S = frozenset(S)
    v, a, b, t, r, d = tree.values, tree.left, tree.right, tree.thresholds, tree.covers, tree.features
    total = 0.0
    stack = [(0, 1.0)]
    while stack:
        j, w = stack.pop()
        f = d[j]
        if f == LEAF:
            total += w * v[j]
        elif f in S:
            stack.append((a[j] if x[f] <= t[j] else b[j], w))
        else:
            stack.append((b[j], w * r[b[j]] / r[j]))
            stack.append((a[j], w * r[a[j]] / r[j]))
    return float(total)


def ensemble_exp_value(ensemble: TreeEnsemble, x, S: Iterable[int]) -> float:
    x = check_x(ensemble, x)
    S = frozenset(S)
    return ensemble.base_score + sum(exp_value(t, x, S) for t in ensemble.trees)


def _players(ensemble: TreeEnsemble, players, cap: int) -> list[int]:
    used = ensemble.used_features()
    if players is None:
        players = used
    else:
        players = sorted(set(int(p) for p in players))
        if any(p < 0 or p >= ensemble.num_features for p in players):
            raise ValueError("player indices must lie in [0, num_features)")
        missing = set(used) - set(players)
        if missing:
            raise ValueError(f"players must include every feature the model splits on; missing {sorted(missing)}")
    if len(players) > cap:
        raise TooManyFeatures(f"{len(players)} features to enumerate exceeds the cap of {cap}")
    return players


def subset_values(ensemble: TreeEnsemble, x, players: list[int]) -> np.ndarray:
    """f_x(S) for every S over ``players``; bit k of the index selects players[k].

    Runs the same cover-weighted walk as :func:`exp_value`, but carries one
    weight per subset so every subset is evaluated in a single pass.
    """
    k = len(players)
    masks = np.arange(1 << k, dtype=np.int64)
    present = {f: ((masks >> bit) & 1).astype(bool) for bit, f in enumerate(players)}
    out = np.full(1 << k, ensemble.base_score, dtype=np.float64)
    for tree in ensemble.trees:
        v, a, b, t, r, d = tree.values, tree.left, tree.right, tree.thresholds, tree.covers, tree.features
        stack = [(0, np.ones(1 << k))]
        while stack:
            j, w = stack.pop()
            if d[j] == LEAF:
                out += w * v[j]
                continue
            in_s = present[d[j]]
            go_left = x[d[j]] <= t[j]
            wa = w * np.where(in_s, 1.0 if go_left else 0.0, r[a[j]] / r[j])
            wb = w * np.where(in_s, 0.0 if go_left else 1.0, r[b[j]] / r[j])
            stack.append((b[j], wb))
            stack.append((a[j], wa))
    return out


def subset_values_scalar(ensemble: TreeEnsemble, x, players: list[int], masks=None,
                         out: np.ndarray | None = None) -> np.ndarray:
    """Same table as :func:`subset_values`, one :func:`exp_value` walk per subset.

    ``masks`` restricts the fill to some subsets of ``out``, so a caller can
    build the table in slices.
    """
    k = len(players)
    out = np.empty(1 << k) if out is None else out
    for mask in range(1 << k) if masks is None else masks:
        S = frozenset(players[bit] for bit in range(k) if mask >> bit & 1)
        out[mask] = ensemble.base_score + sum(exp_value(t, x, S) for t in ensemble.trees)
    return out


def _table(ensemble, x, players, engine):
    if engine == "vectorized":
        return subset_values(ensemble, x, players)
    if engine == "scalar":
        return subset_values_scalar(ensemble, x, players)
    raise ValueError("engine must be 'vectorized' or 'scalar'")


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        counts += m & 1
        m >>= 1
    return counts


def shapley_weights(n_players: int) -> np.ndarray:
    """|S|!(M-|S|-1)!/M! indexed by |S|, computed exactly then rounded once."""
    M = n_players
    return np.array(
        [math.factorial(s) * math.factorial(M - s - 1) / math.factorial(M) for s in range(M)],
        dtype=np.float64,
    )


def interaction_weights(n_players: int) -> np.ndarray:
    """|S|!(M-|S|-2)!/(2(M-1)!) indexed by |S|."""
    M = n_players
    return np.array(
        [math.factorial(s) * math.factorial(M - s - 2) / (2 * math.factorial(M - 1)) for s in range(M - 1)],
        dtype=np.float64,
    )


def shapley_from_table(f: np.ndarray, k: int) -> np.ndarray:
    """Shapley values of ``k`` players from a table of all ``2**k`` subset values."""
    phi = np.zeros(k)
    if k == 0:
        return phi
    masks = np.arange(1 << k, dtype=np.int64)
    sizes = _popcount(masks)
    w = shapley_weights(k)
    for bit in range(k):
        without = masks[(masks >> bit) & 1 == 0]
        phi[bit] = np.sum(w[sizes[without]] * (f[without | (1 << bit)] - f[without]))
    return phi


def brute_shap(ensemble: TreeEnsemble, x, players=None, cap: int = DEFAULT_CAP,
               engine: str = "vectorized") -> Attribution:
    """Exact SHAP values by enumerating all subsets of ``players``.

    ``players`` defaults to the features the ensemble actually splits on;
    any other feature is a dummy player and gets exactly zero. The
    ``scalar`` engine walks the tree once per subset and is only useful as
    a cross-check and for timing.
    """
    x = check_x(ensemble, x)
    players = _players(ensemble, players, cap)
    f = _table(ensemble, x, players, engine)
    phi = np.zeros(ensemble.num_features)
    phi[players] = shapley_from_table(f, len(players))
    return Attribution(phi0=float(f[0]), phi=phi, output=predict(ensemble, x))


def brute_interactions(ensemble: TreeEnsemble, x, players=None, cap: int = DEFAULT_CAP,
                       engine: str = "vectorized") -> InteractionMatrix:
    """Exact Shapley interaction index for every feature pair, main effects on the diagonal."""
    x = check_x(ensemble, x)
    players = _players(ensemble, players, cap)
    k = len(players)
    f = _table(ensemble, x, players, engine)
    phi = shapley_from_table(f, k)
    sub = np.zeros((k, k))
    if k >= 2:
        masks = np.arange(1 << k, dtype=np.int64)
        sizes = _popcount(masks)
        w = interaction_weights(k)
        for p in range(k):
            for q in range(p + 1, k):
                bp, bq = 1 << p, 1 << q
                rest = masks[(masks & (bp | bq)) == 0]
                grad = f[rest | bp | bq] - f[rest | bp] - f[rest | bq] + f[rest]
                sub[p, q] = sub[q, p] = np.sum(w[sizes[rest]] * grad)
    # diagonal is still zero here, so the row sum is the off-diagonal sum
    for p in range(k):
        sub[p, p] = phi[p] - np.sum(sub[p])
    values = np.zeros((ensemble.num_features, ensemble.num_features))
    values[np.ix_(players, players)] = sub
    return InteractionMatrix(phi0=float(f[0]), values=values)
