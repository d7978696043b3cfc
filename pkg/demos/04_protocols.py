"""Small versions of the synthetic studies, written as CSV tables.

Usage: python demos/04_protocols.py [output_dir]

Each study yields one row per replicate, grid cell and metric; the
summaries printed here are medians (angles) over replicates.
"""

import sys
from pathlib import Path

import numpy as np

from treegrad.experiments import default_spec, run_experiment, summarize, write_results

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_results")
out.mkdir(parents=True, exist_ok=True)

runs = {
    "subspace-lowdim": dict(replicates=5),
    "grad-convergence": dict(replicates=2, sizes=(1000, 10_000)),
    "correlation": dict(replicates=2, sizes=(5000,)),
    "rotation-cv": dict(folds=5),
}
for name, kw in runs.items():
    rows = run_experiment(default_spec(name, **kw))
    write_results(rows, out / f"{name}.csv")
    if name == "subspace-lowdim":
        table = summarize(rows, "angle", ("P", "N"))
    elif name == "rotation-cv":
        table = summarize(rows, "rmse", ("rotation",))
    elif name == "correlation":
        table = summarize(rows, "mean_angle", ("rho",), stat=np.mean)
    else:
        table = summarize(rows, "mean_angle", ("N", "depth", "density"))
    print(f"\n{name} ({len(rows)} rows -> {out / (name + '.csv')})")
    for key, val in table.items():
        print("  ", key, round(val, 4))
