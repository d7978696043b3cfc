"""Integrals of functions of the tree gradient field.

Two estimators of ``integral h(grad f) dmu``:

* ``mce``: Monte Carlo average of ``h`` over draws from the measure;
* ``pbe``: sum over leaf cells of ``h(G_leaf) * mu(cell)``, which is the
  exact integral of the piecewise-constant field.

Integrated gradients and the active-subspace matrix are built on top.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .gradfield import GradientField
from .measure import CapabilityError, Measure, Segment

DEFAULT_IG_SAMPLES = 500
CHUNK = 1 << 16


@dataclass(frozen=True)
class Integrand:
    """Batched map from gradient rows ``(n, P)`` to outputs ``(n, ...)``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, G):
        return self.fn(np.atleast_2d(G))


IDENTITY = Integrand("identity", lambda G: G)
OUTER = Integrand("outer-product", lambda G: G[:, :, None] * G[:, None, :])


def _as_integrand(h) -> Integrand:
    if isinstance(h, Integrand):
        return h
    if h in ("identity", None):
        return IDENTITY
    if h == "outer-product":
        return OUTER
    if callable(h):
        return Integrand("custom", h)
    raise ValueError(f"unknown integrand {h!r}")


def _sum_h(h: Integrand, G: np.ndarray, weights=None) -> np.ndarray:
    """``sum_n w_n h(G_n)`` without materializing all outputs at once."""
    total = None
    for s in range(0, len(G), CHUNK):
        block = h(G[s:s + CHUNK])
        part = block.sum(axis=0) if weights is None else np.tensordot(weights[s:s + CHUNK], block, axes=1)
        total = part if total is None else total + part
    return total


def mce(grad: GradientField | Callable, h, m: Measure, samples: int, rng) -> np.ndarray:
    """Monte Carlo estimate from ``samples`` draws of ``m``.

    ``grad`` is a field or any batched callable returning gradient rows.
    """
    if not m.can_sample:
        raise CapabilityError(f"{m.kind} measure cannot be sampled")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    h = _as_integrand(h)
    evaluate = grad.grad_dataset if isinstance(grad, GradientField) else grad
    rng = np.random.default_rng(rng)
    total = None
    for s in range(0, samples, CHUNK):
        X = m.sample(min(CHUNK, samples - s), rng)
        part = _sum_h(h, evaluate(X))
        total = part if total is None else total + part
    return total / samples


def pbe(gf: GradientField, h, m: Measure) -> np.ndarray:
    """Partition sum over the leaves of the field's tree."""
    if not m.can_rect_mass:
        raise CapabilityError(f"{m.kind} measure has no rectangle mass")
    h = _as_integrand(h)
    t = gf.tree
    leaves = t.leaves
    w = m.rect_masses(t.lower[leaves], t.upper[leaves])
    return _sum_h(h, gf.G[leaves], w)


# ---------------------------------------------------------------------------
# integrated gradients


@dataclass(frozen=True)
class AttributionResult:
    x: np.ndarray
    x_ref: np.ndarray
    ig: np.ndarray
    samples: int | None  # None for the exact line integral
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "x_ref": self.x_ref.tolist(), "ig": self.ig.tolist(),
                "m": "exact" if self.samples is None else self.samples, "seed": self.seed,
                **({"meta": self.meta} if self.meta else {})}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _seed_of(rng):
    return rng if isinstance(rng, (int, np.integer)) else None


def tbig(gf: GradientField, x, x_ref, samples: int = DEFAULT_IG_SAMPLES, rng=None) -> AttributionResult:
    """Integrated gradient from ``samples`` uniform points on the segment."""
    x, x_ref = gf.tree.clamp(x), gf.tree.clamp(x_ref)
    mean_grad = mce(gf, IDENTITY, Segment(x_ref, x), samples, rng)
    return AttributionResult(x, x_ref, (x - x_ref) * mean_grad, samples, _seed_of(rng))


def segment_intervals(tree, x, x_ref) -> list[tuple[int, float, float]]:
    """Leaves crossed by ``x_ref + t (x - x_ref)``, ``t`` in [0, 1].

    Returns ``(leaf, t0, t1)`` triples in order of ``t``. A stretch
    running inside a splitting face goes left, as a point on it would.
    """
    x, x_ref = tree.clamp(x), tree.clamp(x_ref)
    d = x - x_ref
    out = []
    stack = [(0, 0.0, 1.0)]
    while stack:
        i, t0, t1 = stack.pop()
        v = tree.var[i]
        if v < 0:
            out.append((int(i), t0, t1))
            continue
        thr, a, dv = tree.threshold[i], x_ref[v], d[v]
        li, ri = tree.left[i], tree.right[i]
        if dv == 0:
            stack.append((li if a <= thr else ri, t0, t1))
            continue
        tc = (thr - a) / dv  # coordinate crosses the threshold here
        if dv > 0:  # left part first
            parts = [(li, t0, min(t1, tc)), (ri, max(t0, tc), t1)]
        else:
            parts = [(ri, t0, min(t1, tc)), (li, max(t0, tc), t1)]
        for child, s0, s1 in reversed(parts):
            if s1 > s0:
                stack.append((child, s0, s1))
    out.sort(key=lambda r: (r[1], r[2]))
    return out


def tbig_exact(gf: GradientField, x, x_ref) -> AttributionResult:
    """Closed-form line integral of the piecewise-constant field."""
    x, x_ref = gf.tree.clamp(x), gf.tree.clamp(x_ref)
    if np.array_equal(x, x_ref):
        return AttributionResult(x, x_ref, np.zeros(gf.p), None)
    mean_grad = np.zeros(gf.p)
    for leaf, t0, t1 in segment_intervals(gf.tree, x, x_ref):
        mean_grad += (t1 - t0) * gf.G[leaf]
    return AttributionResult(x, x_ref, (x - x_ref) * mean_grad, None)


# ---------------------------------------------------------------------------
# active subspace


@dataclass(frozen=True)
class SubspaceResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    measure: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    seed: int | None = None

    @classmethod
    def from_matrix(cls, C, **kw) -> SubspaceResult:
        C = linalg.symmetric(C)
        w, V = linalg.eig_sym(C)
        return cls(C, w, V, **kw)

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(),
                "eigenvectors": self.eigenvectors.T.tolist(),
                "matrix": self.matrix.tolist(),
                "measure": self.measure, "model": self.model, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def as_matrix(gf: GradientField, m: Measure, samples: int | None = None, rng=None) -> np.ndarray:
    """``integral G G^T dmu``, exact when the measure has box masses."""
    if m.can_rect_mass:
        return pbe(gf, OUTER, m)
    if m.can_sample:
        if samples is None:
            raise ValueError("a sample count is required for measures without box masses")
        return mce(gf, OUTER, m, samples, rng)
    raise CapabilityError(f"{m.kind} measure supports neither sampling nor box masses")


def tbas(gf: GradientField, m: Measure, samples: int | None = None, rng=None) -> SubspaceResult:
    C = as_matrix(gf, m, samples, rng)
    return SubspaceResult.from_matrix(C, measure=m.describe(), model=gf.tree.meta, seed=_seed_of(rng))
