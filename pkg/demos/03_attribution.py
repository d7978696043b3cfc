"""Attributing one prediction of a forest to its features.

The integrated gradient walks the segment from a reference point to the
point being explained and averages the gradient field along the way.
For a single tree the average has a closed form (the segment crosses
finitely many cells); the sampled version with 500 points is what one
would use in practice.
"""

import numpy as np

from treegrad import (BootstrapConfig, Dataset, FitConfig, extract, fit, fit_forest, forest_tbig, tbig,
                      tbig_exact)

rng = np.random.default_rng(7)
X = rng.random((5_000, 3))
y = 3 * X[:, 0] ** 2 + np.sin(3 * X[:, 1]) + 0.05 * rng.standard_normal(5_000)
d = Dataset(X, y, ("dose", "age", "noise"))

x, ref = np.array([0.9, 0.6, 0.2]), X.mean(axis=0)
tree = fit(d, FitConfig("cart", 8))
field = extract(tree)
exact = tbig_exact(field, x, ref).ig
sampled = tbig(field, x, ref, 500, 0).ig
print("single tree, exact   :", np.round(exact, 4))
print("single tree, M = 500 :", np.round(sampled, 4))
# the tree gradient is an estimate, so the attributions need not add up
# to the prediction gap exactly
print("prediction gap       :", round(float(tree.predict(x) - tree.predict(ref)), 4),
      " sum of attributions:", round(float(exact.sum()), 4))

forest = fit_forest(d, FitConfig("cart", 8), 25, BootstrapConfig(seed=1, feature_fraction=0.67))
print("forest of 25, M = 500:", np.round(forest_tbig(forest, x, ref, 500, 0).ig, 4))
