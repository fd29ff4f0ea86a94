"""Runtime measurements: fast explainer against brute-force enumeration.

Timings are wall-clock and machine dependent. Work counts (kernel node and
path-element operations) are deterministic and are what the scaling checks
lean on when timings are too noisy to be conclusive.
"""

from __future__ import annotations

import gc
import itertools
import statistics
import time

import numpy as np

from . import oracle, synthetic
from .treeshap import DEFAULT_BACKEND, tree_shap

BENCH_HEADER = ("method", "backend", "T", "D", "M", "used", "sec_per_sample", "work", "work_bound", "work_ratio")
BRUTE_LIMIT = 16


def time_call(fn, repeats: int) -> float:
    """Median wall-clock seconds of ``repeats`` calls after one warmup."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def work_bound(ensemble) -> float:
    """Sum over trees of leaves times depth squared (depth floored at 1)."""
    return float(sum(t.n_leaves * max(t.max_depth, 1) ** 2 for t in ensemble.trees))


def bench_sweep(tree_counts, depths, features, repeats: int = 3, seed: int = 0, backend=None,
                paired: bool = False, brute_limit: int = BRUTE_LIMIT) -> list[dict]:
    """Time one explanation for every (T, D, M) in the sweep.

    With ``paired`` depths and feature counts advance together, as in a
    sweep that grows both at once. Brute force only runs when the model uses
    at most ``brute_limit`` features; otherwise its row reports ``nan``.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    backend = backend or DEFAULT_BACKEND
    grid = (
        [(T, D, M) for T in tree_counts for D, M in zip(depths, features, strict=True)]
        if paired
        else list(itertools.product(tree_counts, depths, features))
    )
    rows = []
    for T, D, M in grid:
        rng = np.random.default_rng([seed, T, D, M])
        ens = synthetic.random_full_ensemble(rng, T, D, M)
        x = rng.uniform(0.0, 1.0, M)
        used = len(ens.used_features())
        _, work = tree_shap(ens, x, backend=backend)
        bound = work_bound(ens)
        sec = time_call(lambda: tree_shap(ens, x, backend=backend), repeats)
        base = {"T": T, "D": D, "M": M, "used": used}
        rows.append({"method": "treeshap", "backend": backend, **base, "sec_per_sample": sec,
                     "work": work, "work_bound": bound, "work_ratio": work / bound})
        brute_sec = brute_work = float("nan")
        if used <= brute_limit:
            brute_sec = time_call(lambda: oracle.brute_shap(ens, x), repeats)
            brute_work = (1 << used) * T
        rows.append({"method": "brute", "backend": "numpy", **base, "sec_per_sample": brute_sec,
                     "work": brute_work, "work_bound": float("nan"), "work_ratio": float("nan")})
    return rows


def work_count_sweep(depths=range(2, 11), n_trees: int = 20, n_features: int = 100, seed: int = 0,
                     backend=None) -> list[dict]:
    """Kernel work counter against the L * D^2 bound for complete trees."""
    rows = []
    for D in depths:
        rng = np.random.default_rng([seed, D])
        ens = synthetic.random_full_ensemble(rng, n_trees, D, n_features)
        _, work = tree_shap(ens, rng.uniform(0.0, 1.0, n_features), backend=backend)
        bound = work_bound(ens)
        rows.append({"D": D, "work": work, "work_bound": bound, "work_ratio": work / bound})
    return rows


def _brute_slices(ens, x, slices: int):
    """Full scalar brute-force SHAP for one input, split into ``slices + 1`` steps."""
    players = ens.used_features()
    k = len(players)
    table = np.empty(1 << k)
    bounds = np.linspace(0, 1 << k, slices + 1).astype(int)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        oracle.subset_values_scalar(ens, x, players, range(lo, hi), table)
        yield
    oracle.shapley_from_table(table, k)
    yield


def _paired_cpu_seconds(small, big, slices: int) -> tuple[float, float]:
    """CPU seconds of two brute-force runs advanced in alternating slices.

    Both runs see the same stretch of machine time, so slow changes in
    machine speed affect them equally.
    """
    runs = [_brute_slices(*small, slices), _brute_slices(*big, slices)]
    spent = [0.0, 0.0]
    gc.collect()
    # freeze the existing heap so collections during the run only scan new objects
    gc.freeze()
    try:
        for _ in range(slices + 1):
            for i, run in enumerate(runs):
                t0 = time.process_time()
                next(run)
                spent[i] += time.process_time() - t0
    finally:
        gc.unfreeze()
    return spent[0], spent[1]


def brute_scaling(features=range(10, 17), seed: int = 0, pairs: int = 3, slices: int = 64) -> list[dict]:
    """Brute-force cost as the number of used features grows.

    Every model comes from :func:`synthetic.feature_chain_ensemble`, so each
    added feature doubles the subsets and adds one tree of fixed shape. The
    scalar engine is timed in CPU seconds. The runs for M and M+1 advance in
    alternating slices, which cancels drift in machine speed, and each step
    ratio is the median over ``pairs`` such runs. ``walks`` counts tree
    walks exactly.
    """
    if pairs < 1 or slices < 1:
        raise ValueError("pairs and slices must be >= 1")
    features = list(features)
    cases = {}
    for M in features:
        ens = synthetic.feature_chain_ensemble(np.random.default_rng([seed, M]), M)
        cases[M] = (ens, np.random.default_rng([seed, M, 1]).uniform(0.0, 1.0, M))
    best = {M: np.inf for M in features}
    ratios = {}
    for small, big in zip(features, features[1:]):
        step = []
        for _ in range(pairs):
            a, b = _paired_cpu_seconds(cases[small], cases[big], slices)
            best[small], best[big] = min(best[small], a), min(best[big], b)
            step.append(b / a)
        ratios[big] = statistics.median(step)
    if len(features) == 1:
        best[features[0]] = _paired_cpu_seconds(cases[features[0]], cases[features[0]], slices)[0]
    return [{"M": M, "seconds": best[M], "walks": (1 << M) * M, "repeats": pairs,
             "ratio": ratios.get(M, float("nan"))} for M in features]
