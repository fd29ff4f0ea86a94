import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from treeattr import fixtures, oracle, synthetic
from treeattr.model import Tree, TreeEnsemble, expected_value, predict

from conftest import ensembles_and_inputs

F, C = fixtures.FEVER, fixtures.COUGH
YY = fixtures.YES_YES


def textbook_shap(ens, x, M=None):
    """Shapley values by definition over every declared feature, one subset at a time."""
    M = ens.num_features if M is None else M
    phi = np.zeros(M)
    for i in range(M):
        others = [j for j in range(M) if j != i]
        for size in range(M):
            w = math.factorial(size) * math.factorial(M - size - 1) / math.factorial(M)
            for S in itertools.combinations(others, size):
                phi[i] += w * (oracle.ensemble_exp_value(ens, x, S + (i,)) - oracle.ensemble_exp_value(ens, x, S))
    return phi


def textbook_interactions(ens, x):
    """Shapley interaction index by definition, diagonal from the row-sum rule."""
    M = ens.num_features
    G = lambda S: oracle.ensemble_exp_value(ens, x, S)
    Phi = np.zeros((M, M))
    for i, j in itertools.combinations(range(M), 2):
        others = [k for k in range(M) if k not in (i, j)]
        for size in range(M - 1):
            w = math.factorial(size) * math.factorial(M - size - 2) / (2 * math.factorial(M - 1))
            for S in itertools.combinations(others, size):
                Phi[i, j] += w * (G(S + (i, j)) - G(S + (i,)) - G(S + (j,)) + G(S))
        Phi[j, i] = Phi[i, j]
    phi = textbook_shap(ens, x)
    for i in range(M):
        Phi[i, i] = phi[i] - (Phi[i].sum() - Phi[i, i])
    return Phi


@pytest.mark.parametrize("S, expected", [((F, C), 80.0), ((), 20.0), ((F,), 40.0), ((C,), 40.0)])
def test_exp_value_model_a(model_a, S, expected):
    assert oracle.exp_value(model_a.trees[0], YY, S) == expected


def test_exp_value_empty_set_is_expected_value(rng):
    ens = synthetic.random_ensemble(rng, 3, 4, 5)
    x = rng.uniform(size=5)
    assert np.isclose(oracle.ensemble_exp_value(ens, x, []), expected_value(ens), rtol=1e-12)
    assert np.isclose(oracle.ensemble_exp_value(ens, x, range(5)), predict(ens, x), rtol=1e-12)


@pytest.mark.parametrize(
    "factory, phi0, phi",
    [(fixtures.model_a, 20.0, [30.0, 30.0]), (fixtures.model_b, 25.0, [30.0, 35.0])],
)
def test_brute_shap_fixtures(factory, phi0, phi):
    att = oracle.brute_shap(factory(), YY)
    assert att.phi0 == phi0
    assert np.allclose(att.phi, phi, atol=1e-12)
    assert att.output == phi0 + sum(phi)


def test_brute_interactions_model_a(model_a):
    Phi = oracle.brute_interactions(model_a, YY).values
    assert np.allclose(Phi, [[20.0, 10.0], [10.0, 20.0]], atol=1e-12)


def test_consistency_a_to_b():
    a = oracle.brute_shap(fixtures.model_a(), YY).phi[C]
    b = oracle.brute_shap(fixtures.model_b(), YY).phi[C]
    assert b >= a


@given(ensembles_and_inputs(max_features=5, max_depth=4, max_trees=3))
@settings(max_examples=40, deadline=None)
def test_matches_textbook_formula_over_all_features(case):
    ens, x = case
    # restricted enumeration over used features equals full enumeration over M
    assert np.allclose(oracle.brute_shap(ens, x).phi, textbook_shap(ens, x), atol=1e-10)


@given(ensembles_and_inputs(max_features=5, max_depth=4, max_trees=3))
@settings(max_examples=30, deadline=None)
def test_interactions_match_textbook_formula(case):
    ens, x = case
    assert np.allclose(oracle.brute_interactions(ens, x).values, textbook_interactions(ens, x), atol=1e-10)


def test_textbook_interactions_model_a(model_a):
    assert np.allclose(textbook_interactions(model_a, YY), [[20.0, 10.0], [10.0, 20.0]])


@given(ensembles_and_inputs(max_features=6))
@settings(max_examples=40, deadline=None)
def test_whitelisting_extra_players_changes_nothing(case):
    ens, x = case
    base = oracle.brute_shap(ens, x)
    full = oracle.brute_shap(ens, x, players=range(ens.num_features))
    assert np.allclose(base.phi, full.phi, atol=1e-10)
    bi = oracle.brute_interactions(ens, x).values
    fi = oracle.brute_interactions(ens, x, players=range(ens.num_features)).values
    assert np.allclose(bi, fi, atol=1e-10)


@given(ensembles_and_inputs())
@settings(max_examples=60, deadline=None)
def test_local_accuracy_dummy_and_interaction_structure(case):
    ens, x = case
    att = oracle.brute_shap(ens, x)
    assert att.check_local_accuracy(rtol=1e-8)
    unused = sorted(set(range(ens.num_features)) - set(ens.used_features()))
    assert np.all(att.phi[unused] == 0.0)
    Phi = oracle.brute_interactions(ens, x)
    assert Phi.asymmetry() <= 1e-8
    assert np.allclose(Phi.phi, att.phi, atol=1e-8)


@given(ensembles_and_inputs(max_trees=1), ensembles_and_inputs(max_trees=1))
@settings(max_examples=30, deadline=None)
def test_linearity(c1, c2):
    (e1, x), (e2, _) = c1, c2
    M = max(e1.num_features, e2.num_features)
    x = np.resize(x, M)
    e1 = TreeEnsemble(e1.trees, e1.base_score, M)
    e2 = TreeEnsemble(e2.trees, e2.base_score, M)
    both = TreeEnsemble(e1.trees + e2.trees, e1.base_score + e2.base_score, M)
    s, a, b = oracle.brute_shap(both, x), oracle.brute_shap(e1, x), oracle.brute_shap(e2, x)
    assert np.allclose(s.phi, a.phi + b.phi, atol=1e-10)
    assert np.isclose(s.phi0, a.phi0 + b.phi0, atol=1e-10)


def test_symmetry_under_feature_swap():
    # f(x0, x1) = g(x0) + g(x1) built as mirror-image trees
    def stump(f):
        return Tree([np.nan, 1.0, 5.0], [1, -1, -1], [2, -1, -1], [0.3, np.nan, np.nan], [f, -1, -1], [3.0, 1.0, 2.0])

    ens = TreeEnsemble([stump(0), stump(1)], 0.0, 2)
    phi = oracle.brute_shap(ens, [0.7, 0.7]).phi
    assert phi[0] == phi[1]


def test_additive_model_has_no_interactions():
    def stump(f):
        return Tree([np.nan, -2.0, 3.0], [1, -1, -1], [2, -1, -1], [0.5, np.nan, np.nan], [f, -1, -1], [4.0, 1.0, 3.0])

    Phi = oracle.brute_interactions(TreeEnsemble([stump(0), stump(1)], 0.0, 2), [0.9, 0.1]).values
    assert Phi[0, 1] == 0.0 and Phi[1, 0] == 0.0


def test_cap():
    ens = synthetic.ensemble_using_features(np.random.default_rng(0), 6, n_trees=2, depth=4)
    with pytest.raises(oracle.TooManyFeatures):
        oracle.brute_shap(ens, np.zeros(6), cap=5)
    with pytest.raises(ValueError, match="missing"):
        oracle.brute_shap(ens, np.zeros(6), players=[0, 1])


def test_weights_sum_to_one():
    for k in range(1, 22):
        w = oracle.shapley_weights(k)
        counts = np.array([math.comb(k - 1, s) for s in range(k)], dtype=float)
        assert np.isclose(np.dot(w, counts), 1.0, rtol=1e-12)


@given(ensembles_and_inputs(max_features=5, max_depth=4, max_trees=3))
@settings(max_examples=25, deadline=None)
def test_scalar_engine_agrees(case):
    ens, x = case
    assert np.allclose(oracle.brute_shap(ens, x, engine="scalar").phi, oracle.brute_shap(ens, x).phi, atol=1e-12)
    assert np.allclose(oracle.brute_interactions(ens, x, engine="scalar").values,
                       oracle.brute_interactions(ens, x).values, atol=1e-12)


def test_no_used_features():
    ens = TreeEnsemble([Tree([4.0], [-1], [-1], [np.nan], [-1], [1.0])], 1.0, 3)
    att = oracle.brute_shap(ens, np.zeros(3))
    assert att.phi0 == 5.0 and np.all(att.phi == 0)
    assert np.all(oracle.brute_interactions(ens, np.zeros(3)).values == 0)


def test_scalar_table_in_slices(rng):
    ens = synthetic.random_ensemble(rng, 3, 3, 5)
    x = rng.uniform(size=5)
    players = ens.used_features()
    whole = oracle.subset_values_scalar(ens, x, players)
    table = np.empty(1 << len(players))
    bounds = [0, 3, len(table) // 2, len(table)]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        oracle.subset_values_scalar(ens, x, players, range(lo, hi), table)
    assert np.array_equal(table, whole)
