"""Synthetic study protocols producing tidy result rows.

Every (replicate, grid cell) pair is an independent task whose random
streams derive from ``(seed + replicate, grid coordinates)``, so any cell
can be rerun alone and tasks may run in any order or in parallel. Rows
are returned in a canonical order.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from . import rotation
from .data import (Dataset, SyntheticSpec, generate_synthetic, normalize_unit_cube, random_direction,
                   true_gradient)
from .gradfield import extract
from .integrodiff import as_matrix
from .linalg import eig_sym, principal_angle, vector_angle
from .measure import Empirical, UniformCube
from .tree import FitConfig, depth_schedule, fit

EXPERIMENTS = ("subspace-lowdim", "subspace-sparse", "grad-convergence", "noise", "correlation", "rotation-cv")
COLUMNS = ("experiment", "replicate", "P", "N", "depth", "density", "sigma", "rho", "rotation", "fold",
           "metric", "value", "seconds", "seed")
GRID = ("P", "N", "depth", "density", "sigma", "rho", "rotation", "fold")


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid of one study. ``depths=()`` means the cyclic-median depth schedule."""

    experiment: str
    dims: tuple[int, ...] = (3,)
    sizes: tuple[int, ...] = (100, 1000, 10000)
    depths: tuple[int, ...] = ()
    replicates: int = 20
    noise: float = 0.0
    rhos: tuple[float, ...] = (0.0,)
    densities: tuple[float, ...] = (1.0,)
    sparsity: int | None = None
    min_leaf: int = 1
    schedule_scale: float = 1.0
    folds: int = 10
    probes: int = 100
    ackley_halfwidth: float = 2.0
    function: str = "log-ridge"  # ridge profile of the rotation study
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        for name in ("dims", "sizes", "depths", "densities"):
            vals = getattr(self, name)
            if any(v <= 0 for v in vals):
                raise ValueError(f"{name} entries must be positive")
        if any(not 0 <= r <= 0.99 for r in self.rhos):
            raise ValueError("rho entries must lie in [0, 0.99]")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.function not in ("log-ridge", "ridge-cosine"):
            raise ValueError("function must be log-ridge or ridge-cosine")


DEFAULTS = {
    "subspace-lowdim": dict(dims=(2, 3, 4), sizes=(100, 1000, 10000), replicates=20, min_leaf=3),
    "noise": dict(dims=(2, 3, 4), sizes=(100, 1000, 10000), replicates=20, min_leaf=3, noise=0.1),
    "subspace-sparse": dict(dims=(50,), sizes=(10000,), depths=(12,), replicates=10, sparsity=3),
    "grad-convergence": dict(dims=(5,), sizes=(1000, 100000), depths=(4, 12), replicates=5,
                             densities=(0.25, 1.0)),
    "correlation": dict(dims=(5,), sizes=(10000,), depths=(12,), replicates=10, rhos=(0.0, 0.5, 0.9, 0.99)),
    "rotation-cv": dict(dims=(5,), sizes=(2000,), depths=(4,), replicates=1, folds=10),
}


def default_spec(experiment: str, **overrides) -> ExperimentSpec:
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    kw = dict(DEFAULTS[experiment])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(experiment, **kw)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    replicate: int
    metric: str
    value: float
    seconds: float
    seed: int
    grid: dict = field(default_factory=dict)

    def key(self):
        return (self.experiment, self.replicate, tuple(_sortable(self.grid.get(g)) for g in GRID), self.metric)

    def as_record(self) -> dict:
        rec = {"experiment": self.experiment, "replicate": self.replicate}
        rec.update({g: self.grid.get(g, "") for g in GRID})
        rec.update(metric=self.metric, value=repr(float(self.value)), seconds=f"{self.seconds:.6f}",
                   seed=self.seed)
        return rec


def _sortable(v):
    return (0, "") if v is None else (1, v) if isinstance(v, (int, float)) else (2, str(v))


def _stream(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(round(k * 1000)) if isinstance(k, float) else k
                                                         for k in key]))


def _int_seed(*key) -> int:
    return int(_stream(*key).integers(0, 2 ** 31 - 1))


# ---------------------------------------------------------------------------
# tasks


def _tasks(spec: ExperimentSpec):
    for r in range(spec.replicates):
        e = spec.experiment
        if e in ("subspace-lowdim", "noise", "subspace-sparse"):
            depths = spec.depths or (None,)
            for p, n, k in product(spec.dims, spec.sizes, depths):
                yield r, dict(P=p, N=n, depth=k, sigma=spec.noise)
        elif e == "grad-convergence":
            for p, n, k, dens in product(spec.dims, spec.sizes, spec.depths or (12,), spec.densities):
                yield r, dict(P=p, N=n, depth=k, density=dens, sigma=spec.noise)
        elif e == "correlation":
            for p, n, k, rho in product(spec.dims, spec.sizes, spec.depths or (12,), spec.rhos):
                yield r, dict(P=p, N=n, depth=k, rho=rho, sigma=spec.noise)
        else:
            for p, n, k in product(spec.dims, spec.sizes, spec.depths or (4,)):
                yield r, dict(P=p, N=n, depth=k, sigma=spec.noise)


def _run_task(args) -> list[ResultRow]:
    spec, r, cell, timing = args
    seed = spec.seed + r
    runner = {"subspace-lowdim": _subspace, "noise": _subspace, "subspace-sparse": _subspace,
              "grad-convergence": _grad_convergence, "correlation": _correlation,
              "rotation-cv": _rotation_cv}[spec.experiment]
    rows = []
    for metric, value, secs, extra in runner(spec, seed, cell):
        rows.append(ResultRow(spec.experiment, r, metric, float(value), secs if timing else 0.0, seed,
                              {**cell, **extra}))
    return rows


def _subspace(spec, seed, cell):
    p, n, k = cell["P"], cell["N"], cell["depth"]
    sparse = spec.experiment == "subspace-sparse"
    a = random_direction(p, _stream(seed, p, 1), sparsity=spec.sparsity)
    syn = SyntheticSpec("ridge-cosine", p, a, sparsity=spec.sparsity, noise=spec.noise,
                        seed=_int_seed(seed, p, n, 2))
    d = generate_synthetic(syn, n)
    t0 = time.perf_counter()
    if sparse:
        cfg = FitConfig("cart", k or 12, spec.min_leaf, seed=seed)
    else:
        cfg = FitConfig("cyclic-median", k, spec.min_leaf, spec.schedule_scale, seed)
    tree = fit(d, cfg)
    C = as_matrix(extract(tree), UniformCube(p))
    v = eig_sym(C)[1][:, 0]
    secs = time.perf_counter() - t0
    depth = cfg.depth_for(n, p)
    out = [("angle", principal_angle(v, a), secs, {"depth": depth})]
    if sparse:
        out.append(("support_energy", float((v[a != 0] ** 2).sum()), secs, {"depth": depth}))
    return out


def mean_probe_angle(grad_fn, syn: SyntheticSpec, probes: np.ndarray) -> float:
    est = grad_fn(probes)
    truth = true_gradient(syn, probes)
    return float(np.mean([vector_angle(g, h) for g, h in zip(est, truth)]))


def _grad_convergence(spec, seed, cell):
    p, n, k, dens = cell["P"], cell["N"], cell["depth"], cell["density"]
    nnz = max(1, math.ceil(dens * p))
    a = random_direction(p, _stream(seed, p, dens, 1), sparsity=nnz, nonnegative=True)
    syn = SyntheticSpec("log-ridge", p, a, sparsity=nnz, noise=spec.noise, seed=_int_seed(seed, p, n, dens, 2))
    d = generate_synthetic(syn, n)
    t0 = time.perf_counter()
    gf = extract(fit(d, FitConfig("cart", k, spec.min_leaf, seed=seed)))
    secs = time.perf_counter() - t0
    probes = _stream(seed, p, dens, 3).random((spec.probes, p))
    return [("mean_angle", mean_probe_angle(gf.grad_dataset, syn, probes), secs, {})]


def _correlation(spec, seed, cell):
    p, n, k, rho = cell["P"], cell["N"], cell["depth"], cell["rho"]
    syn = SyntheticSpec("ackley", p, noise=spec.noise, input_law="truncnormal", rho=rho,
                        seed=_int_seed(seed, p, n, rho, 2), ackley_halfwidth=spec.ackley_halfwidth)
    d = generate_synthetic(syn, n)
    t0 = time.perf_counter()
    gf = extract(fit(d, FitConfig("cart", k, spec.min_leaf, seed=seed)))
    secs = time.perf_counter() - t0
    # probes cover the whole cube, including regions the correlated inputs rarely reach
    probes = _stream(seed, p, rho, 3).random((spec.probes, p))
    return [("mean_angle", mean_probe_angle(gf.grad_dataset, syn, probes), secs, {})]


def rotation_cv_rmse(d: Dataset, rot: str, folds: int, depth: int, rng, min_leaf: int = 1) -> list[float]:
    """Per-fold test RMSE of a depth-limited CART tree on rotated-and-appended features."""
    order = np.random.default_rng(rng).permutation(d.n)
    k = rotation.n_components(d.p)
    out = []
    for f, test in enumerate(np.array_split(order, folds)):
        train = np.setdiff1d(order, test)
        tr, norm = normalize_unit_cube(d.subset(train))
        Xte = np.clip(norm.transform(d.features[test]), 0, 1)
        cfg = FitConfig("cart", depth, min_leaf)
        if rot == "tbas":
            C = as_matrix(extract(fit(tr, cfg)), Empirical(tr.features))
            L = rotation.tbas_map(C, k)
        elif rot == "pca":
            L = rotation.pca_map(tr.features, k)
        elif rot == "random":
            L = rotation.random_map(d.p, k, _stream(f, 7))
        else:
            L = None
        aug, norm2 = normalize_unit_cube(Dataset(rotation.augment(tr.features, L), tr.response))
        model = fit(aug, cfg)
        pred = model.predict(np.clip(norm2.transform(rotation.augment(Xte, L)), 0, 1))
        out.append(float(np.sqrt(np.mean((pred - d.response[test]) ** 2))))
    return out


def _rotation_cv(spec, seed, cell):
    p, n, k = cell["P"], cell["N"], cell["depth"]
    a = random_direction(p, _stream(seed, p, 1), nonnegative=spec.function == "log-ridge")
    d = generate_synthetic(SyntheticSpec(spec.function, p, a, noise=spec.noise, seed=_int_seed(seed, p, n, 2)), n)
    out = []
    for rot in rotation.ROTATIONS:
        t0 = time.perf_counter()
        errs = rotation_cv_rmse(d, rot, spec.folds, k, _stream(seed, p, n, 3), spec.min_leaf)
        secs = (time.perf_counter() - t0) / spec.folds
        out.extend(("rmse", e, secs, {"rotation": rot, "fold": f}) for f, e in enumerate(errs))
    return out


# ---------------------------------------------------------------------------
# driver


def run_experiment(spec: ExperimentSpec, jobs: int = 1, timing: bool = True) -> list[ResultRow]:
    """All rows of a study in canonical order; ``timing=False`` zeroes the seconds column."""
    tasks = [(spec, r, cell, timing) for r, cell in _tasks(spec)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=ResultRow.key)
    keys = [row.key() for row in rows]
    if len(set(keys)) != len(keys):  # pragma: no cover - guards the grid definitions
        raise RuntimeError("duplicate result rows")
    return rows


def write_results(rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row.as_record())


def summarize(rows: list[ResultRow], metric: str, by: tuple[str, ...], stat=np.median) -> dict:
    """``stat`` of ``metric`` over replicates (and folds), grouped by grid columns."""
    groups: dict = {}
    for row in rows:
        if row.metric == metric:
            groups.setdefault(tuple(row.grid.get(b) for b in by), []).append(row.value)
    return {k: float(stat(v)) for k, v in sorted(groups.items(), key=lambda kv: tuple(map(_sortable, kv[0])))}


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **kw)


__all__ = ["EXPERIMENTS", "COLUMNS", "ExperimentSpec", "ResultRow", "default_spec", "run_experiment",
           "write_results", "summarize", "rotation_cv_rmse", "mean_probe_angle", "depth_schedule"]
