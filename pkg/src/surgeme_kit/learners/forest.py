"""Random forest with Gini-impurity trees and bootstrap aggregation.

Trees are stored as flat arrays (feature, threshold, children, leaf
distribution) so prediction vectorizes over samples and serialization is
a plain array dump.  Per-tree RNG streams derive from (seed, tree index),
so a fitted forest is independent of any training-time scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_rng
from .base import ClassifierModel, LabeledMatrix, canonical_row_order

DEFAULT_PARAMS = {
    "trees": 100,
    "max_depth": None,
    "min_leaf": 1,
    "features_per_split": "sqrt",
}


@dataclass
class _Tree:
    feature: np.ndarray    # int32; -1 marks a leaf
    threshold: np.ndarray  # float64; split is x[feature] < threshold
    left: np.ndarray       # int32 child node ids
    right: np.ndarray
    proba: np.ndarray      # (n_nodes, n_classes) leaf class distributions


def _resolve_m(features_per_split, dim: int) -> int:
    if features_per_split == "sqrt":
        return max(1, int(np.sqrt(dim)))
    if features_per_split == "log2":
        return max(1, int(np.log2(dim)) if dim > 1 else 1)
    if features_per_split in (None, "all"):
        return dim
    m = int(features_per_split)
    if not 1 <= m <= dim:
        raise ValueError(f"features_per_split {m} outside 1..{dim}")
    return m


def _class_distribution(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


def _best_split(X, y, idx, feats, min_leaf, n_classes):
    """Vectorized Gini scan over candidate features.

    Returns (feature, threshold) or None when no split separates the node.
    """
    n = idx.shape[0]
    vals = X[np.ix_(idx, feats)]                      # (n, m)
    order = np.argsort(vals, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(vals, order, axis=0)
    sy = y[idx][order]                                # labels in sorted order
    onehot = np.zeros((n, feats.shape[0], n_classes))
    np.put_along_axis(onehot, sy[:, :, None], 1.0, axis=2)
    left_counts = np.cumsum(onehot, axis=0)[:-1]      # counts left of each cut
    total = left_counts[-1] + onehot[-1]
    right_counts = total[None, :, :] - left_counts
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    gini_left = 1.0 - np.sum((left_counts / n_left[:, :, None]) ** 2, axis=2)
    gini_right = 1.0 - np.sum((right_counts / n_right[:, :, None]) ** 2, axis=2)
    cost = (n_left * gini_left + n_right * gini_right) / n
    valid = sorted_vals[:-1] < sorted_vals[1:]        # distinct adjacent values
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    cost = np.where(valid, cost, np.inf)
    flat = int(np.argmin(cost))
    cut, col = np.unravel_index(flat, cost.shape)
    threshold = 0.5 * (sorted_vals[cut, col] + sorted_vals[cut + 1, col])
    return int(feats[col]), float(threshold)


def _grow_tree(X, y, n_classes, rng, max_depth, min_leaf, m) -> tuple[_Tree, np.ndarray]:
    n, dim = X.shape
    boot = rng.integers(0, n, size=n)
    oob_mask = np.ones(n, dtype=bool)
    oob_mask[boot] = False

    feature, threshold, left, right, proba = [], [], [], [], []

    def new_node(idx) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        proba.append(_class_distribution(y[idx], n_classes))
        return node

    root_idx = boot
    stack = [(new_node(root_idx), root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if idx.shape[0] <= max(1, min_leaf) or np.all(y[idx] == y[idx[0]]):
            continue
        feats = rng.choice(dim, size=m, replace=False)
        split = _best_split(X, y, idx, feats, min_leaf, n_classes)
        if split is None:
            continue
        f, thr = split
        go_left = X[idx, f] < thr
        left_idx, right_idx = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((left[node], left_idx, depth + 1))
        stack.append((right[node], right_idx, depth + 1))

    tree = _Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.stack(proba),
    )
    return tree, oob_mask


def _tree_proba(tree: _Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = np.nonzero(tree.feature[node] >= 0)[0]
    while active.size:
        cur = node[active]
        go_left = X[active, tree.feature[cur]] < tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
        active = active[tree.feature[node[active]] >= 0]
    return tree.proba[node]


class RandomForestModel(ClassifierModel):
    kind = "rf"

    def __init__(self, dim, n_classes, params, trees):
        super().__init__(dim, n_classes, params)
        self.trees: list[_Tree] = trees
        # OOB bookkeeping survives training only, not serialization.
        self.oob_masks: list[np.ndarray] | None = None
        self.train_X: np.ndarray | None = None
        self.train_y: np.ndarray | None = None

    def predict_proba(self, x) -> np.ndarray:
        arr, single = self._check_input(x)
        acc = np.zeros((arr.shape[0], self.n_classes))
        for tree in self.trees:
            acc += _tree_proba(tree, arr)
        acc /= len(self.trees)
        return acc[0] if single else acc


def train_random_forest(data: LabeledMatrix, params: dict | None = None,
                        seed: int = 0) -> RandomForestModel:
    """Fit bagged Gini trees; prediction averages per-tree distributions."""
    p = dict(DEFAULT_PARAMS)
    p.update(params or {})
    order = canonical_row_order(data.X, data.y)
    X, y = data.X[order], data.y[order]
    m = _resolve_m(p["features_per_split"], data.dim)
    trees, masks = [], []
    for t in range(int(p["trees"])):
        rng = derive_rng(seed, "rf-tree", t)
        tree, oob = _grow_tree(X, y, data.n_classes, rng,
                               p["max_depth"], int(p["min_leaf"]), m)
        trees.append(tree)
        masks.append(oob)
    model = RandomForestModel(data.dim, data.n_classes, p, trees)
    model.oob_masks = masks
    model.train_X = X
    model.train_y = y
    return model


def oob_error_curve(model: RandomForestModel) -> np.ndarray:
    """Out-of-bag error after 1..n trees, over samples with >= 1 OOB vote."""
    if model.oob_masks is None or model.train_X is None:
        raise ValueError("OOB information is only available on freshly trained models")
    X, y = model.train_X, model.train_y
    votes = np.zeros((X.shape[0], model.n_classes))
    seen = np.zeros(X.shape[0], dtype=bool)
    errors = np.empty(len(model.trees))
    for t, (tree, mask) in enumerate(zip(model.trees, model.oob_masks)):
        if mask.any():
            votes[mask] += _tree_proba(tree, X[mask])
            seen |= mask
        if seen.any():
            pred = np.argmax(votes[seen], axis=1)
            errors[t] = float(np.mean(pred != y[seen]))
        else:
            errors[t] = 1.0
    return errors
