"""Probability measures on the input cube.

A measure may support drawing samples (needed by Monte Carlo estimates)
and/or evaluating the mass of an axis-aligned box (needed by partition
sums). Boxes are half-open, ``lo < x <= hi``, except that the lower face
of the root cell is closed; this mirrors the tree's ``<=`` routing so
that a tree's leaf cells split the mass without double counting.
"""

from __future__ import annotations

import numpy as np


class CapabilityError(TypeError):
    """The measure cannot perform the requested operation."""


class Measure:
    kind = "abstract"
    can_sample = False
    can_rect_mass = False

    def __init__(self, p: int):
        self.p = int(p)

    def sample(self, count: int, rng) -> np.ndarray:
        raise CapabilityError(f"{self.kind} measure cannot be sampled")

    def rect_mass(self, lo, hi) -> float:
        raise CapabilityError(f"{self.kind} measure has no rectangle mass")

    def rect_masses(self, lowers, uppers) -> np.ndarray:
        """Masses of many boxes, one per row."""
        return np.array([self.rect_mass(lo, hi) for lo, hi in zip(lowers, uppers)])

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.p}

    def _check_box(self, lo, hi):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != (self.p,) or hi.shape != (self.p,):
            raise ValueError(f"box bounds must have length {self.p}")
        if (lo > hi).any():
            raise ValueError("box lower bound exceeds upper bound")
        return lo, hi


class UniformCube(Measure):
    kind = "uniform-cube"
    can_sample = True
    can_rect_mass = True

    def sample(self, count, rng):
        return np.random.default_rng(rng).random((count, self.p))

    def rect_mass(self, lo, hi):
        lo, hi = self._check_box(lo, hi)
        return float(np.prod(np.clip(np.minimum(hi, 1.0) - np.maximum(lo, 0.0), 0.0, None)))

    def rect_masses(self, lowers, uppers):
        lowers, uppers = np.atleast_2d(lowers), np.atleast_2d(uppers)
        w = np.clip(np.minimum(uppers, 1.0) - np.maximum(lowers, 0.0), 0.0, None)
        return np.prod(w, axis=1)


class Empirical(Measure):
    """Equal weights on a finite point set (clamped to the unit cube)."""

    kind = "empirical"
    can_sample = True
    can_rect_mass = True

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("empirical measure needs at least one point")
        super().__init__(pts.shape[1])
        self.points = np.clip(pts, 0.0, 1.0)
        self.points.setflags(write=False)

    def sample(self, count, rng):
        idx = np.random.default_rng(rng).integers(0, len(self.points), size=count)
        return self.points[idx]

    def rect_mass(self, lo, hi):
        lo, hi = self._check_box(lo, hi)
        X = self.points
        above = (X > lo) | ((lo <= 0.0) & (X >= lo))
        inside = (above & (X <= hi)).all(axis=1)
        return float(inside.mean())

    def describe(self):
        return {"kind": self.kind, "dim": self.p, "n_points": len(self.points)}


class Segment(Measure):
    """Uniform measure on the segment from ``start`` to ``end``."""

    kind = "segment"
    can_sample = True

    def __init__(self, start, end):
        start = np.asarray(start, dtype=float).reshape(-1)
        end = np.asarray(end, dtype=float).reshape(-1)
        if start.shape != end.shape:
            raise ValueError("segment endpoints differ in dimension")
        super().__init__(len(start))
        self.start, self.end = start, end

    def sample(self, count, rng):
        u = np.random.default_rng(rng).random(count)
        return self.start + u[:, None] * (self.end - self.start)

    def describe(self):
        return {"kind": self.kind, "dim": self.p, "start": self.start.tolist(), "end": self.end.tolist()}


def sample(m: Measure, count: int, rng) -> np.ndarray:
    if not m.can_sample:
        raise CapabilityError(f"{m.kind} measure cannot be sampled")
    return m.sample(count, rng)


def rect_mass(m: Measure, lo, hi) -> float:
    if not m.can_rect_mass:
        raise CapabilityError(f"{m.kind} measure has no rectangle mass")
    return m.rect_mass(lo, hi)
