import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from treeattr import clustering, synthetic
from treeattr.clustering import DegenerateInput, cluster_attributions, leaf_order, r2_curve
from treeattr.model import TreeEnsemble, leaf_tree

hierarchy = pytest.importorskip("scipy.cluster.hierarchy")


@pytest.mark.parametrize("linkage", clustering.LINKAGES)
def test_matches_scipy(linkage, rng):
    X = rng.normal(size=(60, 5))
    ours = cluster_attributions(X, linkage).as_array()
    ref = hierarchy.linkage(X, method=linkage)
    assert np.allclose(ours[:, 2], ref[:, 2], rtol=1e-12, atol=1e-12)
    assert np.array_equal(ours[:, 3], ref[:, 3])
    assert np.array_equal(np.sort(ours[:, :2], axis=1), np.sort(ref[:, :2], axis=1))


@given(arrays(np.float64, st.tuples(st.integers(2, 25), st.integers(1, 4)), elements=st.floats(-100, 100)),
       st.sampled_from(clustering.LINKAGES))
@settings(max_examples=60, deadline=None)
def test_structure(X, linkage):
    tree = cluster_attributions(X, linkage)
    n = len(X)
    assert len(tree.merges) == n - 1
    h = tree.as_array()[:, 2]
    assert np.all(np.diff(h) >= -1e-9 * max(1.0, h.max()))
    seen = [c for m in tree.merges for c in (m.a, m.b)]
    assert sorted(seen) == list(range(2 * n - 2))
    assert tree.merges[-1].size == n
    assert sorted(leaf_order(tree)) == list(range(n))


def test_identical_pair_merges_first():
    tree = cluster_attributions(np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0]]))
    assert (tree.merges[0].a, tree.merges[0].b, tree.merges[0].height) == (0, 2, 0.0)


def test_all_identical():
    tree = cluster_attributions(np.ones((6, 3)))
    assert all(m.height == 0.0 for m in tree.merges)


def test_two_rows_order():
    assert list(leaf_order(cluster_attributions(np.array([[1.0], [2.0]])))) == [0, 1]


def test_planted_groups_recovered(rng):
    X, labels = synthetic.planted_groups(rng, sizes=(25, 15))
    perm = rng.permutation(len(X))
    X, labels = X[perm], labels[perm]
    tree = cluster_attributions(X)
    found = tree.labels(2)
    agree = np.sum(found == labels)
    assert min(agree, len(X) - agree) == 0
    order = leaf_order(tree)
    seq = labels[order]
    assert np.count_nonzero(np.diff(seq)) == 1


def test_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        cluster_attributions(np.zeros((1, 3)))
    with pytest.raises(DegenerateInput):
        cluster_attributions(np.array([[0.0], [np.nan]]))
    with pytest.raises(ValueError):
        cluster_attributions(np.zeros((3, 1)), "single")


def test_r2_endpoints_and_monotone(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    curve = r2_curve(cluster_attributions(X, "ward"), y)
    assert curve.r2[0] == 1.0 and curve.r2[-1] == 0.0
    assert list(curve.groups) == list(range(40, 0, -1))
    assert not curve.flagged


@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.just(2)), elements=st.floats(-10, 10)),
       st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_r2_matches_direct_computation(X, seed):
    y = np.random.default_rng(seed).normal(size=len(X))
    tree = cluster_attributions(X)
    curve = r2_curve(tree, y)
    sst = np.sum((y - y.mean()) ** 2)
    for g, r2 in zip(curve.groups[1:-1], curve.r2[1:-1]):
        lab = tree.labels(int(g))
        sse = sum(np.sum((y[lab == k] - y[lab == k].mean()) ** 2) for k in np.unique(lab))
        assert np.isclose(r2, 1 - sse / sst, atol=1e-9)
    assert np.all(np.diff(curve.r2) <= 1e-12)


def test_r2_constant_outputs_flagged():
    curve = r2_curve(cluster_attributions(np.arange(8.0).reshape(4, 2)), np.full(4, 3.0))
    assert curve.flagged and list(curve.r2) == [1.0, 1.0, 1.0, 0.0]


def test_r2_planted_outputs(rng):
    X, labels = synthetic.planted_groups(rng)
    y = labels * 5.0 + rng.normal(0.0, 0.01, len(labels))
    curve = r2_curve(cluster_attributions(X), y)
    assert curve.r2[-2] > 0.99 and curve.r2[-1] == 0.0


def test_compare_supervised_clusterings(rng):
    ens = synthetic.random_ensemble(rng, 5, 4, 4)
    X = rng.uniform(size=(30, 4))
    out = clustering.compare_supervised_clusterings(ens, X)
    assert set(out) == {"treeshap", "saabas"}
    for c in out.values():
        assert c.r2[0] == 1.0 and c.r2[-1] == 0.0 and 0 <= c.area() <= 1
    same = clustering.compare_supervised_clusterings(ens, X, methods=("treeshap",))
    assert np.array_equal(same["treeshap"].r2, out["treeshap"].r2)
    const = clustering.compare_supervised_clusterings(TreeEnsemble([leaf_tree(1.0)], 0.0, 4), X)
    assert all(c.flagged for c in const.values())
