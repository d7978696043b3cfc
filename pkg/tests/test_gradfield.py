import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegrad.data import Dataset, SyntheticSpec, generate_synthetic, true_gradient
from treegrad.gradfield import extract, split_slope
from treegrad.linalg import vector_angle
from treegrad.tree import FitConfig, fit, from_splits

from conftest import with_population_means


def test_depth_one_example():
    t = from_splits(2, {0: (0, 0.5)}, [0.5, 0.2, 0.8])
    gf = extract(t)
    np.testing.assert_allclose(gf.G[1], [1.2, 0.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(gf.grad_at([0.1, 0.9]), [1.2, 0.0], atol=1e-15)
    # the illustrated arithmetic drops the factor 2 and would give 0.6
    assert split_slope(t, 0) == pytest.approx(2 * (0.8 - 0.2) / (1 - 0))
    assert split_slope(t, 0) / 2 == pytest.approx(0.6)


def test_constant_tree_has_zero_field():
    t = from_splits(2, {0: (0, 0.5), 1: (1, 0.3)}, [1.0] * 5)
    assert not extract(t).G.any()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(-3, 3))
def test_linear_exactness(seed, p, b):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(p)
    X = rng.random((200, p))
    t = with_population_means(fit(Dataset(X, X @ a), FitConfig("cyclic-median", 2 * p)), a, b)
    gf = extract(t)
    for i in np.flatnonzero(~t.is_leaf):
        assert abs(gf.G[i, t.var[i]] - a[t.var[i]]) <= 1e-12 * max(1, abs(a).max())


def test_inheritance_and_zero_propagation(small_cart):
    _, t = small_cart
    gf = extract(t)
    for i in range(1, t.n_nodes):
        par = t.parent[i]
        diff = np.flatnonzero(gf.G[i] != gf.G[par])
        if t.var[i] < 0:
            assert diff.size == 0
        else:
            assert set(diff) <= {t.var[i]}
            assert gf.G[i, t.var[i]] == split_slope(t, i)
    for leaf in t.leaves:
        path_vars, j = set(), t.parent[leaf]
        while j >= 0:
            path_vars.add(int(t.var[j]))
            j = t.parent[j]
        for q in range(t.p):
            if q not in path_vars:
                assert gf.G[leaf, q] == 0.0


def test_single_pass(small_cart, monkeypatch):
    _, t = small_cart
    seen = []
    orig = t.iter_nodes

    def counting():
        for i in orig():
            seen.append(i)
            yield i

    monkeypatch.setattr(t, "iter_nodes", counting)
    extract(t)
    assert sorted(seen) == list(range(t.n_nodes))


def test_piecewise_constant_and_batch(small_cart):
    _, t = small_cart
    gf = extract(t)
    X = np.random.default_rng(1).random((1000, 3))
    batch = gf.grad_dataset(X)
    loop = np.array([gf.grad_at(x) for x in X])
    np.testing.assert_array_equal(batch, loop)
    np.testing.assert_array_equal(gf.grad_dataset(X[:1]), [gf.grad_at(X[0])])
    np.testing.assert_array_equal(gf.grad_dataset(np.vstack([X[0], X[0]]))[1], gf.grad_at(X[0]))
    leaves = t.apply(X)
    for leaf in np.unique(leaves):
        assert (batch[leaves == leaf] == gf.G[leaf]).all()


def test_bounded_field():
    """|gamma| at a node is at most 2 * range(f) / width for cell-mean values."""
    rng = np.random.default_rng(3)
    X = rng.random((2000, 2))
    y = np.sin(5 * X[:, 0]) * np.cos(3 * X[:, 1])
    t = fit(Dataset(X, y), FitConfig("cart", 8))
    gf = extract(t)
    B = np.abs(y).max()
    for i in np.flatnonzero(~t.is_leaf):
        w = t.upper[i, t.var[i]] - t.lower[i, t.var[i]]
        assert abs(gf.G[i, t.var[i]]) <= 2 * (2 * B) / w + 1e-12


def test_convergence_trend_log_ridge():
    a = np.array([0.6, 0.8])
    spec = SyntheticSpec("log-ridge", 2, a, seed=2)
    probes = np.random.default_rng(7).random((100, 2))
    truth = true_gradient(spec, probes)
    med = {}
    for n in (100, 100_000):
        t = fit(generate_synthetic(spec, n), FitConfig("cyclic-median", None))
        est = extract(t).grad_dataset(probes)
        med[n] = np.median([vector_angle(g, h) for g, h in zip(est, truth)])
    assert med[100_000] < med[100]


def test_leaf_export(notation):
    import json
    gf = extract(notation)
    rec = json.loads(gf.dumps())
    assert [r["leaf"] for r in rec["leaves"]] == [3, 4, 5, 6]
    assert rec["leaves"][2]["lower"] == [0.5, 0.0]
