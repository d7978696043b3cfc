"""Datasets, unit-cube normalization and the synthetic test functions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FUNCTIONS = ("ridge-cosine", "log-ridge", "ackley")
INPUT_LAWS = ("uniform", "truncnormal")

# truncated-normal marginal scale and rejection budget
TRUNCNORM_MEAN = 0.5
TRUNCNORM_SD = 0.15
MAX_CONSECUTIVE_REJECTIONS = 1000

# default Ackley input box is [-2, 2]^P, reached by rescaling the unit cube
ACKLEY_HALFWIDTH = 2.0


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.response, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x P matrix, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DataError(f"response has {y.shape[0]} rows, features have {X.shape[0]}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{p + 1}" for p in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> Dataset:
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.response[rows], self.feature_names)


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine map onto [0, 1].

    Constant columns are stored with a unit-width window centred on the
    constant, so they map to 0.5 and still round-trip.
    """

    lower: np.ndarray
    upper: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if not (hi > lo).all():
            raise ValueError("every upper bound must exceed its lower bound")
        const = (np.zeros(lo.shape, dtype=bool) if self.constant is None
                 else np.asarray(self.constant, dtype=bool).reshape(-1))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "constant", const)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.lower) / (self.upper - self.lower)

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * (self.upper - self.lower) + self.lower

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Normalizer:
        return cls(np.array(d["lower"], dtype=float), np.array(d["upper"], dtype=float),
                   np.array(d["constant"], dtype=bool))


def load_csv(path, target: str) -> Dataset:
    """Read a headered numeric CSV; ``target`` becomes the response."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if target not in header:
            raise DataError(f"{path}: target column {target!r} not found in header {header}")
        rows = []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: row {r}, column {name!r}: cannot parse {cell!r} as a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {r}, column {name!r}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    t = header.index(target)
    keep = [j for j in range(len(header)) if j != t]
    if not keep:
        raise DataError(f"{path}: no feature columns besides the target")
    return Dataset(table[:, keep], table[:, t], tuple(header[j] for j in keep))


def normalize_unit_cube(d: Dataset) -> tuple[Dataset, Normalizer]:
    lo = d.features.min(axis=0)
    hi = d.features.max(axis=0)
    const = hi <= lo
    lo = np.where(const, lo - 0.5, lo)
    hi = np.where(const, hi + 0.5, hi)
    norm = Normalizer(lo, hi, const)
    Z = np.clip(norm.transform(d.features), 0.0, 1.0)
    return Dataset(Z, d.response, d.feature_names), norm


# ---------------------------------------------------------------------------
# synthetic functions


@dataclass(frozen=True)
class SyntheticSpec:
    function: str
    dim: int
    direction: np.ndarray | None = None
    sparsity: int | None = None
    noise: float = 0.0
    input_law: str = "uniform"
    rho: float = 0.0
    seed: int = 0
    ackley_halfwidth: float = ACKLEY_HALFWIDTH

    def __post_init__(self):
        if self.function not in FUNCTIONS:
            raise ValueError(f"unknown function id {self.function!r}; expected one of {FUNCTIONS}")
        if self.input_law not in INPUT_LAWS:
            raise ValueError(f"unknown input law {self.input_law!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.sparsity is not None and not 1 <= self.sparsity <= self.dim:
            raise ValueError("sparsity must lie in [1, dim]")
        if not 0.0 <= self.rho <= 0.99:
            raise ValueError("rho must lie in [0, 0.99]")
        if self.noise < 0:
            raise ValueError("noise standard deviation must be nonnegative")
        if self.ackley_halfwidth <= 0:
            raise ValueError("ackley_halfwidth must be positive")
        if self.direction is None:
            if self.function != "ackley":
                raise ValueError(f"{self.function} needs a direction vector")
            return
        a = np.asarray(self.direction, dtype=float).reshape(-1)
        if a.shape[0] != self.dim:
            raise ValueError("direction length differs from dim")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("direction must have unit norm")
        if self.function == "log-ridge" and np.minimum(a, 0).sum() <= -1.0:
            # 1 + a'x must stay positive on the whole cube
            raise ValueError("log-ridge direction makes 1 + a'x nonpositive on the cube")
        a.setflags(write=False)
        object.__setattr__(self, "direction", a)

    @property
    def metadata(self) -> dict:
        meta = {"function": self.function, "dim": self.dim, "noise": self.noise,
                "input_law": self.input_law, "rho": self.rho, "seed": self.seed}
        if self.function == "ackley":
            meta["ackley_domain"] = [-self.ackley_halfwidth, self.ackley_halfwidth]
        return meta


def random_direction(p: int, rng, sparsity: int | None = None, nonnegative: bool = False) -> np.ndarray:
    """Unit vector with ``sparsity`` Gaussian nonzero entries at random positions."""
    rng = np.random.default_rng(rng)
    k = p if sparsity is None else sparsity
    a = np.zeros(p)
    support = np.sort(rng.choice(p, size=k, replace=False))
    a[support] = rng.standard_normal(k)
    if nonnegative:
        a = np.abs(a)
    nrm = np.linalg.norm(a)
    if nrm == 0:  # pragma: no cover - measure zero
        a[support[0]] = 1.0
        nrm = 1.0
    return a / nrm


def evaluate(spec: SyntheticSpec, X) -> np.ndarray:
    """Noiseless synthetic function at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.function == "ridge-cosine":
        return np.cos(6 * np.pi * ((X - 0.5) @ spec.direction))
    if spec.function == "log-ridge":
        return np.log1p(X @ spec.direction)
    z = spec.ackley_halfwidth * (2 * X - 1)
    r = np.sqrt(np.mean(z ** 2, axis=1))
    c = np.mean(np.cos(2 * np.pi * z), axis=1)
    return -20 * np.exp(-0.2 * r) - np.exp(c) + 20 + np.e


def true_gradient(spec: SyntheticSpec, x) -> np.ndarray:
    """Analytic gradient; accepts one point or a matrix of points."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if spec.function == "ridge-cosine":
        t = (X - 0.5) @ spec.direction
        g = (-6 * np.pi * np.sin(6 * np.pi * t))[:, None] * spec.direction
    elif spec.function == "log-ridge":
        g = spec.direction / (1 + X @ spec.direction)[:, None]
    else:
        p = X.shape[1]
        z = spec.ackley_halfwidth * (2 * X - 1)
        r = np.sqrt(np.mean(z ** 2, axis=1))
        c = np.mean(np.cos(2 * np.pi * z), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(r > 0, 4 * np.exp(-0.2 * r) / (p * r), 0.0)
        dz = radial[:, None] * z + (2 * np.pi / p) * np.exp(c)[:, None] * np.sin(2 * np.pi * z)
        g = dz * (2 * spec.ackley_halfwidth)  # chain rule through the rescale
    return g[0] if single else g


def sample_inputs(spec: SyntheticSpec, n: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    if spec.input_law == "uniform":
        return rng.random((n, spec.dim))
    return _truncated_normal(n, spec.dim, spec.rho, rng)


def _truncated_normal(n: int, p: int, rho: float, rng) -> np.ndarray:
    cov = TRUNCNORM_SD ** 2 * ((1 - rho) * np.eye(p) + rho * np.ones((p, p)))
    chol = np.linalg.cholesky(cov)
    out = []
    have = 0
    run = 0  # rejections since the last acceptance
    batch = max(2 * n, 256)
    while have < n:
        Z = TRUNCNORM_MEAN + rng.standard_normal((batch, p)) @ chol.T
        ok = ((Z >= 0) & (Z <= 1)).all(axis=1)
        hits = np.flatnonzero(ok)
        gaps = np.diff(np.concatenate(([-run - 1], hits, [batch])))  # includes carry-over
        if (gaps - 1 >= MAX_CONSECUTIVE_REJECTIONS).any():
            raise RuntimeError(f"truncated-normal sampler rejected {MAX_CONSECUTIVE_REJECTIONS} draws in a row")
        run = batch - 1 - hits[-1] if hits.size else run + batch
        out.append(Z[hits])
        have += hits.size
    return np.concatenate(out)[:n]


def generate_synthetic(spec: SyntheticSpec, n: int) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(spec.seed)
    X = sample_inputs(spec, n, rng)
    y = evaluate(spec, X)
    if spec.noise > 0:
        y = y + spec.noise * rng.standard_normal(n)
    return Dataset(X, y)
