import numpy as np
import pytest

from treegrad.data import Dataset
from treegrad.ensemble import (BootstrapConfig, Forest, fit_forest, forest_grad_at, forest_tbas, forest_tbig,
                               forest_tbig_exact)
from treegrad.gradfield import extract
from treegrad.integrodiff import as_matrix, tbas, tbig, tbig_exact
from treegrad.measure import Empirical, UniformCube
from treegrad.tree import FitConfig, fit, from_splits


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.random((600, 3))
    return Dataset(X, np.log1p(X @ [0.2, 0.5, 0.8]) + 0.02 * rng.standard_normal(600))


@pytest.fixture(scope="module")
def forest(data):
    return fit_forest(data, FitConfig("cart", 5), 6, BootstrapConfig(seed=3, feature_fraction=0.67))


def test_degenerate_forest_matches_tree(data):
    cfg = FitConfig("cart", 5)
    f = fit_forest(data, cfg, 1, BootstrapConfig(replace=False))
    t = fit(data, cfg)
    np.testing.assert_array_equal(f.trees[0].threshold, t.threshold)
    x = np.array([0.3, 0.2, 0.9])
    np.testing.assert_array_equal(forest_grad_at(f, x), extract(t).grad_at(x))
    np.testing.assert_allclose(forest_tbas(f, UniformCube(3)).matrix, tbas(extract(t), UniformCube(3)).matrix,
                               rtol=1e-15)
    a, b = forest_tbig(f, x, [0.5] * 3, 500, 4), tbig(extract(t), x, [0.5] * 3, 500, 4)
    np.testing.assert_array_equal(a.ig, b.ig)


def test_determinism_with_threads(data):
    cfg, bs = FitConfig("cart", 5), BootstrapConfig(seed=7, feature_fraction=0.5)
    serial = fit_forest(data, cfg, 5, bs).dumps()
    assert fit_forest(data, cfg, 5, bs).dumps() == serial
    assert fit_forest(data, cfg, 5, bs, n_jobs=3).dumps() == serial


def test_prediction_and_gradient_are_tree_means(forest):
    X = np.random.default_rng(1).random((50, 3))
    np.testing.assert_allclose(forest.predict(X), sum(t.predict(X) for t in forest.trees) / forest.n_trees,
                               rtol=1e-14)
    for x in X[:10]:
        loop = sum(extract(t).grad_at(x) for t in forest.trees) / forest.n_trees
        np.testing.assert_allclose(forest_grad_at(forest, x), loop, rtol=1e-14, atol=1e-15)


def test_cancellation_and_copies():
    t = from_splits(2, {0: (0, 0.5)}, [0, 0, 1])
    neg = t.with_values(-t.value)
    f = Forest([t, neg], BootstrapConfig())
    assert not forest_grad_at(f, [0.3, 0.3]).any()
    copies = Forest([t] * 4, BootstrapConfig())
    np.testing.assert_array_equal(forest_grad_at(copies, [0.3, 0.3]), extract(t).grad_at([0.3, 0.3]))


def test_forest_tbas_is_mean_of_tree_matrices(forest, data):
    for m in (UniformCube(3), Empirical(data.features)):
        res = forest_tbas(forest, m)
        mean = np.mean([as_matrix(extract(t), m) for t in forest.trees], axis=0)
        assert np.abs(res.matrix - mean).max() <= 1e-12
        assert res.eigenvalues[-1] >= -1e-10 * res.eigenvalues[0]
        assert res.model["aggregation"] == "mean-of-tree-matrices"


def test_constant_forest_zero_matrix():
    X = np.random.default_rng(0).random((40, 2))
    f = fit_forest(Dataset(X, np.ones(40)), FitConfig("cart", 4), 3)
    assert not forest_tbas(f, UniformCube(2)).matrix.any()


def test_forest_tbig(forest):
    x, ref = np.array([0.9, 0.1, 0.7]), np.array([0.2, 0.6, 0.3])
    assert not forest_tbig(forest, x, x, 100, 0).ig.any()
    exact = np.mean([tbig_exact(extract(t), x, ref).ig for t in forest.trees], axis=0)
    np.testing.assert_allclose(forest_tbig_exact(forest, x, ref).ig, exact, rtol=1e-14)
    est = forest_tbig(forest, x, ref, 1_000_000, 2).ig
    assert np.abs(est - exact).max() <= 0.01 * np.abs(exact).max()
    assert forest_tbig(forest, x, ref, 10, 0).meta["aggregation"] == "mean-field"


def test_serialization(forest):
    again = Forest.from_dict(forest.to_dict())
    assert again.dumps() == forest.dumps()
    assert again.bootstrap == forest.bootstrap


def test_validation(data):
    with pytest.raises(ValueError):
        Forest([], BootstrapConfig())
    with pytest.raises(ValueError):
        BootstrapConfig(sample_fraction=0)
    with pytest.raises(ValueError):
        fit_forest(data, FitConfig("cart", 3), 0)
    with pytest.raises(ValueError, match="share"):
        Forest([from_splits(2, {}, [0.0]), from_splits(3, {}, [0.0])], BootstrapConfig())
