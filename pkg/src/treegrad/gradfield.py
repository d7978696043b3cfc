"""Gradient estimates read off the structure of a fitted tree."""

from __future__ import annotations

import json

import numpy as np

from .tree import RegressionTree


class GradientField:
    """Per-node gradient vectors ``G`` and the leaf-wise constant field they induce."""

    def __init__(self, tree: RegressionTree, G: np.ndarray):
        G = np.asarray(G, dtype=float)
        if G.shape != (tree.n_nodes, tree.p):
            raise ValueError(f"expected gradients of shape {(tree.n_nodes, tree.p)}, got {G.shape}")
        G.setflags(write=False)
        self.tree = tree
        self.G = G

    @property
    def p(self) -> int:
        return self.tree.p

    def grad_at(self, x) -> np.ndarray:
        return self.G[self.tree.locate(x)[0]].copy()

    def grad_dataset(self, X) -> np.ndarray:
        return self.G[self.tree.apply(np.atleast_2d(X))]

    def leaf_records(self) -> list[dict]:
        t = self.tree
        return [{"leaf": int(i), "lower": t.lower[i].tolist(), "upper": t.upper[i].tolist(),
                 "gradient": self.G[i].tolist()} for i in t.leaves]

    def dumps(self) -> str:
        return json.dumps({"format": "treegrad-leaf-gradients", "version": 1, "dim": self.p,
                           "leaves": self.leaf_records()}, indent=1)


def split_slope(tree: RegressionTree, i: int) -> float:
    """Finite-difference analog at internal node ``i``: twice the jump in
    child means over the node's width along its split variable."""
    v = tree.var[i]
    width = tree.upper[i, v] - tree.lower[i, v]
    return 2.0 * (tree.value[tree.right[i]] - tree.value[tree.left[i]]) / width


def extract(tree: RegressionTree) -> GradientField:
    """One parent-first pass: copy the parent's vector, then overwrite the
    coordinate of the node's own split. Leaves keep the inherited copy."""
    G = np.zeros((tree.n_nodes, tree.p))
    for i in tree.iter_nodes():
        par = tree.parent[i]
        if par >= 0:
            G[i] = G[par]
        if tree.var[i] >= 0:
            G[i, tree.var[i]] = split_slope(tree, i)
    return GradientField(tree, G)
