import math

import numpy as np
import pytest

from treeattr import bench, oracle, synthetic
from treeattr.verify import run_verify


def test_verify_passes_small():
    rep = run_verify(seed=3, trials=50)
    assert rep.passed and rep.trials == 50


def test_verify_negative_control():
    assert not run_verify(seed=3, trials=5, inject_error=1e-7).passed


def test_verify_python_backend():
    assert run_verify(seed=4, trials=30, max_features=6, backend="python").passed


def test_verify_argument_errors():
    with pytest.raises(ValueError):
        run_verify(trials=-1)
    with pytest.raises(oracle.TooManyFeatures):
        run_verify(trials=1, max_features=25)


def test_time_call_rejects_zero_repeats():
    with pytest.raises(ValueError):
        bench.time_call(lambda: None, 0)


def test_sweep_skips_brute_over_limit():
    rows = bench.bench_sweep([2], [3], [20], repeats=1, brute_limit=4)
    brute = [r for r in rows if r["method"] == "brute"][0]
    assert math.isnan(brute["sec_per_sample"])


def test_work_count_is_deterministic():
    a = bench.work_count_sweep([3, 5], n_trees=4, n_features=10)
    b = bench.work_count_sweep([3, 5], n_trees=4, n_features=10, backend="python")
    assert [r["work"] for r in a] == [r["work"] for r in b]


def test_feature_chain_uses_every_feature():
    ens = synthetic.feature_chain_ensemble(np.random.default_rng(0), 7)
    assert ens.used_features() == list(range(7)) and ens.stats["T"] == 7
