"""Second-order gradient boosting of regression trees on the logistic loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .. import _kernels
from .logistic import _check_inputs


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 50
    max_depth: int = 2
    learning_rate: float = 0.1
    min_child_weight: float = 1.0
    subsample_seed: int = 0
    subsample: float = 1.0
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if not self.min_child_weight >= 0:
            raise ValueError("min_child_weight must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if not self.reg_lambda >= 0:
            raise ValueError("reg_lambda must be >= 0")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree. Internal node ``i`` sends ``x[feature] < threshold`` to ``left[i]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    def apply(self, X):
        return self.value[_leaf_ids(self, X)]

    def to_dict(self):
        return {k: getattr(self, k).tolist()
                for k in ("feature", "threshold", "left", "right", "value", "gain")}

    @classmethod
    def from_dict(cls, d):
        ints = ("feature", "left", "right")
        return cls(**{k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64)
                      for k in ("feature", "threshold", "left", "right", "value", "gain")})


def _grow_tree(X, order, g, h, active, cfg: GbtConfig) -> Tree:
    feature, threshold, left, right, value, gain = [-1], [0.0], [-1], [-1], [0.0], [0.0]
    node_of = np.where(active, 0, -1).astype(np.int64)
    frontier = [0]  # tree ids of the open leaves, indexed by level-local node id
    for _depth in range(cfg.max_depth):
        n_open = len(frontier)
        valid = node_of >= 0
        G = np.bincount(node_of[valid], weights=g[valid], minlength=n_open).astype(np.float64)
        H = np.bincount(node_of[valid], weights=h[valid], minlength=n_open).astype(np.float64)
        bg, bf, bt = _kernels.find_best_splits(X, order, g, h, node_of, G, H,
                                               cfg.reg_lambda, cfg.min_child_weight)
        next_frontier = []
        remap = np.full(n_open, -1, dtype=np.int64)
        remap_right = np.full(n_open, -1, dtype=np.int64)
        for local, tid in enumerate(frontier):
            if bf[local] < 0:
                continue
            feature[tid] = int(bf[local])
            threshold[tid] = float(bt[local])
            gain[tid] = float(bg[local])
            for side in (left, right):
                side[tid] = len(feature)
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(0.0)
                gain.append(0.0)
            remap[local] = len(next_frontier)
            next_frontier.append(left[tid])
            remap_right[local] = len(next_frontier)
            next_frontier.append(right[tid])
        if not next_frontier:
            break
        rows = np.flatnonzero(node_of >= 0)
        local = node_of[rows]
        split = bf[local] >= 0
        go_left = np.zeros(len(rows), dtype=bool)
        go_left[split] = X[rows[split], bf[local[split]]] < bt[local[split]]
        new = np.where(go_left, remap[local], remap_right[local])
        node_of[rows] = np.where(split, new, -1)
        frontier = next_frontier
    # leaf values come from routing every active row through the finished tree
    tree = Tree(*(np.asarray(a) for a in (feature, threshold, left, right, value, gain)))
    leaf = _leaf_ids(tree, X)
    Gl = np.bincount(leaf[active], weights=g[active], minlength=len(feature))
    Hl = np.bincount(leaf[active], weights=h[active], minlength=len(feature))
    is_leaf = tree.feature < 0
    vals = np.where(is_leaf, -Gl / np.where(Hl + cfg.reg_lambda > 0, Hl + cfg.reg_lambda, 1.0), 0.0)
    return Tree(tree.feature.astype(np.int64), tree.threshold.astype(np.float64),
                tree.left.astype(np.int64), tree.right.astype(np.int64),
                cfg.learning_rate * vals, tree.gain.astype(np.float64))


def _leaf_ids(tree: Tree, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[node]
        internal = feat >= 0
        if not internal.any():
            return node
        rows = np.flatnonzero(internal)
        go_left = X[rows, feat[rows]] < tree.threshold[node[rows]]
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])


def logistic_loss(margin, y, w):
    return -(w @ (y * log_expit(margin) + (1 - y) * log_expit(-margin))) / w.sum()


def fit_gbt(X, y, w, cfg: GbtConfig):
    """Return ``(base_margin, trees, losses)``; ``losses[r]`` is the loss after r rounds."""
    X, y, w = _check_inputs(X, y, w)
    X = np.ascontiguousarray(X)
    order = np.ascontiguousarray(
        np.stack([np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]).astype(np.int64)
    ) if X.shape[1] else np.zeros((0, X.shape[0]), dtype=np.int64)
    prev = (w @ y) / w.sum()
    base = float(np.log(prev) - np.log1p(-prev))
    margin = np.full(len(y), base)
    rng = np.random.default_rng(cfg.subsample_seed)
    trees = []
    losses = [logistic_loss(margin, y, w)]
    for _ in range(cfg.rounds):
        mu = expit(margin)
        g = w * (mu - y)
        h = w * mu * (1 - mu)
        active = w > 0
        if cfg.subsample < 1:
            active &= rng.random(len(y)) < cfg.subsample
        tree = _grow_tree(X, order, g, h, active, cfg)
        trees.append(tree)
        margin = margin + tree.apply(X)
        losses.append(logistic_loss(margin, y, w))
    return base, trees, losses
