import numpy as np
import pytest

from treegrad.data import Dataset, SyntheticSpec, generate_synthetic
from treegrad.tree import FitConfig, fit, from_splits


def notation_tree():
    """Depth-2 notation tree: root splits x at 0.5, both children split y."""
    return from_splits(2, {0: (0, 0.5), 1: (1, 0.4), 2: (1, 0.6)},
                       values=[0.5, 0.2, 0.8, 0.1, 0.3, 1.0, 0.6])


def uniform_cell_mean(a, lo, hi, b=0.0):
    """Exact mean of a'x + b over the box [lo, hi] under the uniform law."""
    return float(a @ (0.5 * (np.asarray(lo) + np.asarray(hi))) + b)


def with_population_means(tree, a, b=0.0):
    return tree.with_values([uniform_cell_mean(a, tree.lower[i], tree.upper[i], b)
                             for i in range(tree.n_nodes)])


@pytest.fixture
def notation():
    return notation_tree()


@pytest.fixture(scope="session")
def logridge_tree():
    """Depth-8 CART tree on noiseless log-ridge, P=3, N=10^4."""
    a = np.array([0.48, 0.6, 0.64])
    d = generate_synthetic(SyntheticSpec("log-ridge", 3, a, seed=11), 10_000)
    return fit(d, FitConfig("cart", 8))


@pytest.fixture(scope="session")
def small_cart():
    rng = np.random.default_rng(5)
    X = rng.random((400, 3))
    y = np.sin(4 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.standard_normal(400)
    d = Dataset(X, y)
    return d, fit(d, FitConfig("cart", 6))
