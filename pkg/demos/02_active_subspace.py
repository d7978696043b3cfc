"""Finding the important direction of a ridge function.

y = cos(6 pi a'(x - 0.5)) varies only along a. Averaging the outer
product of the tree gradient over the cube gives a matrix whose leading
eigenvector should line up with a. The partition sum is exact for the
tree, so no Monte Carlo error enters. Single fits are noisy, so each
sample size is repeated on fresh data.
"""

import numpy as np

from treegrad import (FitConfig, SyntheticSpec, UniformCube, extract, fit, generate_synthetic,
                      principal_angle, random_direction, tbas)

p, reps = 3, 10
a = random_direction(p, 3)
print("true direction:", np.round(a, 3))
print("N        depth  angle to a (rad): median [quartiles]")
for n in (100, 1_000, 10_000, 100_000):
    angles = []
    for r in range(reps):
        d = generate_synthetic(SyntheticSpec("ridge-cosine", p, a, seed=1000 * r + n), n)
        tree = fit(d, FitConfig("cyclic-median", None, min_samples_leaf=3))
        v = tbas(extract(tree), UniformCube(p)).eigenvectors[:, 0]
        angles.append(principal_angle(v, a))
    q1, med, q3 = np.percentile(angles, [25, 50, 75])
    print(f"{n:<8d} {tree.max_depth:<6d} {med:.3f} [{q1:.3f}, {q3:.3f}]")
