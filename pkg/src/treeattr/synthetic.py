"""Random tree ensembles and planted-structure datasets for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .model import LEAF, Tree, TreeEnsemble


def random_tree(rng: np.random.Generator, max_depth: int, n_features: int, split_prob: float = 0.8,
                full: bool = False, features=None) -> Tree:
    """Grow a random binary tree breadth first.

    Internal nodes split with probability ``split_prob`` (always when
    ``full``); each split sends a uniform(0.05, 0.95) share of the cover left.
    ``features`` restricts which feature indices may be split on.
    """
    pool = np.arange(n_features) if features is None else np.asarray(features)
    values, left, right, thr, feat, cov, depth = [], [], [], [], [], [], []

    def node(c, dep):
        values.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        thr.append(np.nan)
        feat.append(LEAF)
        cov.append(c)
        depth.append(dep)
        return len(values) - 1

    node(float(rng.uniform(1.0, 100.0)), 0)
    j = 0
    while j < len(values):
        if depth[j] < max_depth and len(pool) and (full or rng.random() < split_prob):
            share = rng.uniform(0.05, 0.95)
            a = node(cov[j] * share, depth[j] + 1)
            b = node(cov[j] - cov[a], depth[j] + 1)
            left[j], right[j] = a, b
            feat[j] = int(rng.choice(pool))
            thr[j] = float(rng.uniform(0.0, 1.0))
        else:
            values[j] = float(rng.normal(0.0, 1.0))
        j += 1
    return Tree(values, left, right, thr, feat, cov)


def random_ensemble(rng: np.random.Generator, n_trees: int, max_depth: int, n_features: int,
                    split_prob: float = 0.8, full: bool = False) -> TreeEnsemble:
    trees = [random_tree(rng, max_depth, n_features, split_prob, full) for _ in range(n_trees)]
    return TreeEnsemble(trees, float(rng.normal()), n_features)


def random_full_tree_fast(rng: np.random.Generator, depth: int, n_features: int) -> Tree:
    """Complete tree of the given depth built with array ops (heap layout)."""
    n = 2 ** (depth + 1) - 1
    n_inner = 2**depth - 1
    idx = np.arange(n)
    inner = idx < n_inner
    left = np.where(inner, 2 * idx + 1, LEAF)
    right = np.where(inner, 2 * idx + 2, LEAF)
    feat = np.where(inner, rng.integers(0, n_features, n), LEAF)
    thr = np.where(inner, rng.uniform(0.0, 1.0, n), np.nan)
    values = np.where(inner, np.nan, rng.normal(0.0, 1.0, n))
    # cover of each node = parent cover * share, shares drawn per node
    cov = np.empty(n)
    cov[0] = rng.uniform(1.0, 100.0)
    share = rng.uniform(0.05, 0.95, n_inner)
    for lvl in range(depth):
        p = np.arange(2**lvl - 1, 2 ** (lvl + 1) - 1)
        cov[2 * p + 1] = cov[p] * share[p]
        cov[2 * p + 2] = cov[p] - cov[2 * p + 1]
    return Tree(values, left, right, thr, feat, cov)


def random_full_ensemble(rng: np.random.Generator, n_trees: int, depth: int, n_features: int) -> TreeEnsemble:
    return TreeEnsemble([random_full_tree_fast(rng, depth, n_features) for _ in range(n_trees)], 0.0, n_features)


def ensemble_using_features(rng: np.random.Generator, n_used: int, n_trees: int = 2, depth: int = 6) -> TreeEnsemble:
    """Ensemble over exactly ``n_used`` features, each split on at least once."""
    while True:
        ens = TreeEnsemble(
            [random_tree(rng, depth, n_used, split_prob=1.0, full=True) for _ in range(n_trees)], 0.0, n_used
        )
        if len(ens.used_features()) == n_used:
            return ens


def feature_chain_ensemble(rng: np.random.Generator, n_features: int) -> TreeEnsemble:
    """``n_features`` depth-2 trees; tree i splits on i, then on i+1 (mod M).

    Every feature is used and the per-tree shape is fixed, so the cost of one
    conditional-expectation walk grows linearly with M.
    """
    M = n_features
    trees = []
    for i in range(M):
        nxt = (i + 1) % M
        c = rng.uniform(0.2, 0.8, 3)
        root = 100.0
        l, r = root * c[0], root * (1 - c[0])
        trees.append(
            Tree(
                values=[np.nan, np.nan, np.nan, *rng.normal(size=4)],
                left=[1, 3, 5, LEAF, LEAF, LEAF, LEAF],
                right=[2, 4, 6, LEAF, LEAF, LEAF, LEAF],
                thresholds=[*rng.uniform(size=3), np.nan, np.nan, np.nan, np.nan],
                features=[i, nxt, nxt, LEAF, LEAF, LEAF, LEAF],
                covers=[root, l, r, l * c[1], l * (1 - c[1]), r * c[2], r * (1 - c[2])],
            )
        )
    return TreeEnsemble(trees, 0.0, M)


def planted_groups(rng: np.random.Generator, sizes=(20, 20), n_features: int = 4, separation: float = 10.0,
                   noise: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Attribution-like matrix with well separated groups; returns (matrix, labels)."""
    blocks, labels = [], []
    for g, size in enumerate(sizes):
        centre = np.zeros(n_features)
        centre[g % n_features] = separation * (1 + g // n_features)
        blocks.append(centre + rng.normal(0.0, noise, (size, n_features)))
        labels.extend([g] * size)
    return np.vstack(blocks), np.array(labels)
