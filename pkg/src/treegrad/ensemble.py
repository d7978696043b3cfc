"""Bagged forests of gradient-carrying trees."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import integrodiff
from .data import Dataset
from .gradfield import GradientField, extract
from .integrodiff import IDENTITY, AttributionResult, SubspaceResult
from .measure import Measure, Segment
from .tree import FitConfig, RegressionTree, fit


@dataclass(frozen=True)
class BootstrapConfig:
    sample_fraction: float = 1.0
    replace: bool = True
    feature_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must lie in (0, 1]")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError("feature_fraction must lie in (0, 1]")


class Forest:
    def __init__(self, trees: list[RegressionTree], bootstrap: BootstrapConfig, fit_config: FitConfig | None = None):
        if not trees:
            raise ValueError("a forest needs at least one tree")
        p = trees[0].p
        for t in trees:
            if t.p != p or not (np.array_equal(t.root_lower, trees[0].root_lower)
                                and np.array_equal(t.root_upper, trees[0].root_upper)):
                raise ValueError("all trees must share dimension and root cell")
        self.trees = list(trees)
        self.fields = [extract(t) for t in self.trees]
        self.bootstrap = bootstrap
        self.fit_config = fit_config

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return self.trees[0].p

    def clamp(self, X):
        return self.trees[0].clamp(X)

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def grad_dataset(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        total = np.zeros((X.shape[0], self.p))
        for gf in self.fields:
            total += gf.grad_dataset(X)
        return total / self.n_trees

    def grad_at(self, x) -> np.ndarray:
        return self.grad_dataset(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def to_dict(self) -> dict:
        return {"format": "treegrad-forest", "version": 1, "n_trees": self.n_trees,
                "bootstrap": asdict(self.bootstrap),
                "fit_config": None if self.fit_config is None else asdict(self.fit_config),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> Forest:
        if d.get("format") != "treegrad-forest":
            raise ValueError("not a serialized forest")
        if d.get("version") != 1:
            raise ValueError(f"unsupported forest format version {d.get('version')}")
        cfg = None if d.get("fit_config") is None else FitConfig(**d["fit_config"])
        return cls([RegressionTree.from_dict(t) for t in d["trees"]], BootstrapConfig(**d["bootstrap"]), cfg)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _resample(n: int, bs: BootstrapConfig, rng) -> np.ndarray:
    k = max(1, int(round(bs.sample_fraction * n)))
    if bs.replace:
        return rng.integers(0, n, size=k)
    return np.sort(rng.choice(n, size=k, replace=False))


def fit_forest(d: Dataset, cfg: FitConfig, n_trees: int, bootstrap: BootstrapConfig = BootstrapConfig(),
               n_jobs: int = 1) -> Forest:
    """Tree ``t`` draws its rows and split features from seed ``bootstrap.seed + t``."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")

    def one(t):
        rng = np.random.default_rng(bootstrap.seed + t)
        rows = _resample(d.n, bootstrap, rng)
        tree_cfg = FitConfig(cfg.mode, cfg.max_depth, cfg.min_samples_leaf, cfg.schedule_scale, bootstrap.seed + t)
        return fit(d.subset(rows), tree_cfg, bootstrap.feature_fraction, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(one, range(n_trees)))
    else:
        trees = [one(t) for t in range(n_trees)]
    return Forest(trees, bootstrap, cfg)


def forest_grad_at(f: Forest, x) -> np.ndarray:
    return f.grad_at(x)


def forest_tbas(f: Forest, m: Measure) -> SubspaceResult:
    """Mean of the per-tree partition matrices (not the matrix of the mean field)."""
    C = np.mean([integrodiff.as_matrix(gf, m) for gf in f.fields], axis=0)
    return SubspaceResult.from_matrix(C, measure=m.describe(),
                                      model={"forest": f.n_trees, "aggregation": "mean-of-tree-matrices"})


def forest_tbig(f: Forest, x, x_ref, samples: int = integrodiff.DEFAULT_IG_SAMPLES, rng=None) -> AttributionResult:
    """Sampled integrated gradient of the averaged gradient field."""
    x, x_ref = f.clamp(x), f.clamp(x_ref)
    mean_grad = integrodiff.mce(f.grad_dataset, IDENTITY, Segment(x_ref, x), samples, rng)
    return AttributionResult(x, x_ref, (x - x_ref) * mean_grad, samples, integrodiff._seed_of(rng),
                             {"aggregation": "mean-field"})


def forest_tbig_exact(f: Forest, x, x_ref) -> AttributionResult:
    """Exact line integral; linear in the field, so the per-tree mean."""
    parts = [integrodiff.tbig_exact(gf, x, x_ref) for gf in f.fields]
    ig = np.mean([r.ig for r in parts], axis=0)
    return AttributionResult(parts[0].x, parts[0].x_ref, ig, None, None, {"aggregation": "mean-field"})


def load_model(d: dict) -> RegressionTree | Forest:
    if d.get("format") == "treegrad-forest":
        return Forest.from_dict(d)
    return RegressionTree.from_dict(d)


def field_of(model) -> GradientField | Forest:
    return model if isinstance(model, Forest) else extract(model)
