"""Constant-leaf regression trees with explicit cell bounds.

Nodes live in flat arrays indexed in breadth-first insertion order, so a
parent always has a smaller index than its children and the nodes of one
depth are contiguous. Points with ``x[var] <= threshold`` go left.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset

FORMAT_VERSION = 1
MODES = ("cart", "cyclic-median")


@dataclass(frozen=True)
class FitConfig:
    """Fitting options.

    ``max_depth=None`` in cyclic-median mode selects the depth schedule
    ``ceil(schedule_scale * P * log2(log2(N)))``.
    """

    mode: str = "cart"
    max_depth: int | None = 8
    min_samples_leaf: int = 1
    schedule_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown fit mode {self.mode!r}; expected one of {MODES}")
        if self.max_depth is None:
            if self.mode != "cyclic-median":
                raise ValueError("max_depth is required in cart mode")
        elif self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.schedule_scale <= 0:
            raise ValueError("schedule_scale must be positive")

    def depth_for(self, n: int, p: int) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return depth_schedule(n, p, self.schedule_scale)


def depth_schedule(n: int, p: int, scale: float = 1.0) -> int:
    """Slowly growing split budget ``ceil(scale * P * log2 log2 N)``, at least 1."""
    if n < 4:
        return 1
    return max(1, math.ceil(scale * p * math.log2(math.log2(n))))


@dataclass(frozen=True)
class Node:
    index: int
    parent: int
    depth: int
    lower: np.ndarray
    upper: np.ndarray
    value: float
    count: int
    var: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.var is None


class RegressionTree:
    """Fitted tree. Treat as immutable; every array is read-only."""

    def __init__(self, parent, depth, lower, upper, value, count, var, threshold,
                 left, right, root_lower=None, root_upper=None, meta=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.depth = np.asarray(depth, dtype=np.int64)
        self.lower = np.asarray(lower, dtype=float).reshape(len(self.parent), -1)
        self.upper = np.asarray(upper, dtype=float).reshape(len(self.parent), -1)
        self.value = np.asarray(value, dtype=float)
        self.count = np.asarray(count, dtype=np.int64)
        self.var = np.asarray(var, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.root_lower = self.lower[0].copy() if root_lower is None else np.asarray(root_lower, dtype=float)
        self.root_upper = self.upper[0].copy() if root_upper is None else np.asarray(root_upper, dtype=float)
        self.meta = dict(meta or {})
        for a in (self.parent, self.depth, self.lower, self.upper, self.value, self.count,
                  self.var, self.threshold, self.left, self.right, self.root_lower, self.root_upper):
            a.setflags(write=False)
        self._check()

    def _check(self):
        n = self.n_nodes
        if n < 1 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root")
        if (self.parent[1:] >= np.arange(1, n)).any() or (self.parent[1:] < 0).any():
            raise ValueError("every parent index must be smaller than its child's")
        if not (self.upper > self.lower).all():
            raise ValueError("node cells must have positive width in every coordinate")
        internal = self.var >= 0
        if (self.var[internal] >= self.p).any():
            raise ValueError("split variable out of range")

    # -- shape ---------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def p(self) -> int:
        return self.lower.shape[1]

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    @property
    def is_leaf(self) -> np.ndarray:
        return self.var < 0

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.var < 0)

    def node(self, i: int) -> Node:
        split = self.var[i] >= 0
        return Node(int(i), int(self.parent[i]), int(self.depth[i]), self.lower[i], self.upper[i],
                    float(self.value[i]), int(self.count[i]),
                    int(self.var[i]) if split else None,
                    float(self.threshold[i]) if split else None,
                    int(self.left[i]) if split else None,
                    int(self.right[i]) if split else None)

    def iter_nodes(self):
        """Node indices with every parent before its children."""
        return iter(range(self.n_nodes))

    def nodes_at_depth(self, k: int) -> list[int]:
        return np.flatnonzero(self.depth == k).tolist()

    def with_values(self, values) -> RegressionTree:
        """Copy of this tree with node values replaced."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.value.shape:
            raise ValueError("one value per node is required")
        return RegressionTree(self.parent, self.depth, self.lower, self.upper, values, self.count,
                              self.var, self.threshold, self.left, self.right,
                              self.root_lower, self.root_upper, self.meta)

    # -- routing -------------------------------------------------------------

    def clamp(self, X) -> np.ndarray:
        return np.clip(np.asarray(X, dtype=float), self.root_lower, self.root_upper)

    def apply(self, X, k: int | None = None) -> np.ndarray:
        """Node index at depth ``k`` (default: the leaf) for every row of ``X``.

        Rows whose path ends above depth ``k`` get their leaf.
        """
        X = np.atleast_2d(self.clamp(X))
        if X.shape[1] != self.p:
            raise ValueError(f"points have {X.shape[1]} coordinates, tree expects {self.p}")
        idx = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        steps = self.max_depth if k is None else k
        for _ in range(steps):
            v = self.var[idx]
            inner = v >= 0
            if not inner.any():
                break
            go_left = X[rows, np.maximum(v, 0)] <= self.threshold[idx]
            idx = np.where(inner, np.where(go_left, self.left[idx], self.right[idx]), idx)
        return idx

    def locate(self, x, k: int | str = "deepest") -> tuple[int, bool]:
        """Index of the node containing ``x`` at depth ``k``.

        Returns ``(index, exact)``; ``exact`` is False when the path to
        ``x`` ends in a leaf above depth ``k``.
        """
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if k == "deepest":
            return int(self.apply(x)[0]), True
        if k < 0:
            raise ValueError("depth must be nonnegative")
        i = int(self.apply(x, k)[0])
        return i, bool(self.depth[i] == k)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = self.value[self.apply(X)]
        return out[0] if X.ndim == 1 else out

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            rec = {"index": i, "parent": int(self.parent[i]), "depth": int(self.depth[i]),
                   "lower": self.lower[i].tolist(), "upper": self.upper[i].tolist(),
                   "value": float(self.value[i]), "count": int(self.count[i]), "split": None}
            if self.var[i] >= 0:
                rec["split"] = {"var": int(self.var[i]), "threshold": float(self.threshold[i]),
                                "left": int(self.left[i]), "right": int(self.right[i])}
            nodes.append(rec)
        return {"format": "treegrad-tree", "version": FORMAT_VERSION, "dim": self.p,
                "root_lower": self.root_lower.tolist(), "root_upper": self.root_upper.tolist(),
                "meta": self.meta, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> RegressionTree:
        if d.get("format") != "treegrad-tree":
            raise ValueError("not a serialized tree")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported tree format version {d.get('version')}")
        nodes = sorted(d["nodes"], key=lambda r: r["index"])
        if [r["index"] for r in nodes] != list(range(len(nodes))):
            raise ValueError("node indices must be 0..n-1")
        cols = {k: [] for k in ("parent", "depth", "lower", "upper", "value", "count",
                                "var", "threshold", "left", "right")}
        for r in nodes:
            for k in ("parent", "depth", "lower", "upper", "value", "count"):
                cols[k].append(r[k])
            s = r.get("split")
            cols["var"].append(-1 if s is None else s["var"])
            cols["threshold"].append(math.nan if s is None else s["threshold"])
            cols["left"].append(-1 if s is None else s["left"])
            cols["right"].append(-1 if s is None else s["right"])
        return cls(**cols, root_lower=d["root_lower"], root_upper=d["root_upper"], meta=d.get("meta"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> RegressionTree:
        return cls.from_dict(json.loads(text))


def from_splits(p: int, splits: dict, values, counts=None, root_lower=None, root_upper=None) -> RegressionTree:
    """Build a tree by hand.

    ``splits`` maps a node index to ``(var, threshold)``; children are
    numbered breadth-first, so the caller must use the same numbering.
    """
    lo0 = np.zeros(p) if root_lower is None else np.asarray(root_lower, dtype=float)
    hi0 = np.ones(p) if root_upper is None else np.asarray(root_upper, dtype=float)
    b = _Builder(p, lo0, hi0)
    b.add(-1, 0, lo0, hi0, 0.0, 0)
    queue = deque([0])
    while queue:
        i = queue.popleft()
        if i in splits:
            var, thr = splits[i]
            li, ri = b.split(i, var, thr, (0.0, 0), (0.0, 0))
            queue.extend((li, ri))
    values = np.asarray(values, dtype=float)
    if values.shape != (len(b.parent),):
        raise ValueError(f"expected {len(b.parent)} node values, got {values.shape}")
    b.value = list(values)
    b.count = [1] * len(values) if counts is None else list(counts)
    return b.finish({"mode": "manual"})


class _Builder:
    def __init__(self, p, lo0, hi0):
        self.p = p
        self.lo0, self.hi0 = lo0, hi0
        self.parent, self.depth, self.lower, self.upper = [], [], [], []
        self.value, self.count = [], []
        self.var, self.threshold, self.left, self.right = [], [], [], []

    def add(self, parent, depth, lo, hi, value, count) -> int:
        self.parent.append(parent)
        self.depth.append(depth)
        self.lower.append(lo)
        self.upper.append(hi)
        self.value.append(value)
        self.count.append(count)
        self.var.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.parent) - 1

    def split(self, i, var, thr, left_stats, right_stats) -> tuple[int, int]:
        lo, hi = self.lower[i], self.upper[i]
        if not lo[var] < thr < hi[var]:
            raise ValueError(f"threshold {thr} is not strictly inside node {i}'s cell along variable {var}")
        lhi = hi.copy()
        lhi[var] = thr
        rlo = lo.copy()
        rlo[var] = thr
        d = self.depth[i] + 1
        li = self.add(i, d, lo, lhi, *left_stats)
        ri = self.add(i, d, rlo, hi, *right_stats)
        self.var[i], self.threshold[i], self.left[i], self.right[i] = var, thr, li, ri
        return li, ri

    def finish(self, meta) -> RegressionTree:
        return RegressionTree(self.parent, self.depth, np.array(self.lower).reshape(-1, self.p),
                              np.array(self.upper).reshape(-1, self.p), self.value, self.count,
                              self.var, self.threshold, self.left, self.right,
                              self.lo0, self.hi0, meta)


# ---------------------------------------------------------------------------
# fitting


def fit(d: Dataset, cfg: FitConfig, feature_fraction: float = 1.0, rng=None,
        root_lower=None, root_upper=None) -> RegressionTree:
    """Fit a tree to a dataset whose features lie in the root cell.

    ``feature_fraction < 1`` draws a random subset of candidate variables
    at every CART split from ``rng`` (random-forest style).
    """
    X, y = d.features, d.response
    n, p = X.shape
    m = cfg.min_samples_leaf
    if n < 2 * m:
        raise ValueError(f"need at least {2 * m} samples for min_samples_leaf={m}, got {n}")
    if not 0 < feature_fraction <= 1:
        raise ValueError("feature_fraction must lie in (0, 1]")
    lo0 = np.zeros(p) if root_lower is None else np.asarray(root_lower, dtype=float)
    hi0 = np.ones(p) if root_upper is None else np.asarray(root_upper, dtype=float)
    depth = cfg.depth_for(n, p)
    meta = {"mode": cfg.mode, "max_depth": depth, "min_samples_leaf": m, "seed": cfg.seed}
    if feature_fraction < 1:
        meta["feature_fraction"] = feature_fraction
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    n_feat = max(1, int(round(feature_fraction * p)))

    b = _Builder(p, lo0, hi0)
    b.add(-1, 0, lo0, hi0, float(y.mean()), n)
    queue = deque([(0, np.arange(n))])
    while queue:
        i, rows = queue.popleft()
        if b.depth[i] >= depth or len(rows) < 2 * m:
            continue
        if cfg.mode == "cart":
            feats = None
            if n_feat < p:
                feats = np.sort(rng.choice(p, size=n_feat, replace=False))
            found = _best_cart_split(X[rows], y[rows], b.lower[i], b.upper[i], m, feats)
        else:
            found = _median_split(X[rows], b.depth[i] % p, b.lower[i], b.upper[i], m)
        if found is None:
            continue
        var, thr = found
        mask = X[rows, var] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        li, ri = b.split(i, var, thr, (float(y[lrows].mean()), len(lrows)),
                         (float(y[rrows].mean()), len(rrows)))
        queue.append((li, lrows))
        queue.append((ri, rrows))
    return b.finish(meta)


def split_scores(Xn: np.ndarray, yn: np.ndarray, lo, hi, m: int):
    """All CART candidates of a node.

    Returns ``(gain, thresholds, valid)``, each of shape ``(P, n-1)``;
    column ``j`` splits after the ``j``-th smallest value of a variable,
    at the midpoint to the next value. ``gain`` is the decrease in the
    sum of squared errors.
    """
    n = len(yn)
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    ys = ys - yn.mean()  # centring keeps the sums well conditioned
    csum = np.cumsum(ys, axis=0)[:-1]
    total = ys.sum()
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    gain = csum ** 2 / nl + (total - csum) ** 2 / nr - total ** 2 / n
    a, c = xs[:-1], xs[1:]
    thr = 0.5 * (a + c)
    valid = (c > a) & (thr >= a) & (thr < c) & (thr > lo) & (thr < hi)
    valid &= (nl >= m) & (nr >= m)
    return gain.T, thr.T, valid.T


def _best_cart_split(Xn, yn, lo, hi, m, feats=None):
    if np.ptp(yn) == 0:
        return None
    gain, thr, valid = split_scores(Xn, yn, lo, hi, m)
    if feats is not None:
        keep = np.zeros(Xn.shape[1], dtype=bool)
        keep[feats] = True
        valid &= keep[:, None]
    if not valid.any():
        return None
    g = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(g))  # first maximum: lowest variable, then lowest threshold
    if not g.flat[flat] > 0:
        return None
    var, j = divmod(flat, g.shape[1])
    return var, float(thr[var, j])


def median_threshold(values: np.ndarray) -> float:
    s = np.sort(values)
    n = len(s)
    if n % 2:
        return float(s[n // 2])
    return float(0.5 * (s[n // 2 - 1] + s[n // 2]))


def _median_split(Xn, var, lo, hi, m):
    thr = median_threshold(Xn[:, var])
    if not lo[var] < thr < hi[var]:
        return None
    nl = int((Xn[:, var] <= thr).sum())
    if nl < m or len(Xn) - nl < m:
        return None
    return var, thr


def config_dict(cfg: FitConfig) -> dict:
    return asdict(cfg)
