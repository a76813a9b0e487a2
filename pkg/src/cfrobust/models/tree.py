from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ConstraintSet, Dataset


@dataclass(frozen=True)
class TreeModel:
    """Binary tree of axis-aligned splits; ``x[feature] <= threshold`` goes left.

    Node arrays are indexed by node id; leaves have ``feature == -1``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    max_depth: int = 7

    kind = "tree"

    def __post_init__(self):
        for name in ("feature", "left", "right", "value"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "threshold", np.asarray(self.threshold, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.n_features

    @property
    def classes(self) -> tuple:
        return tuple(int(c) for c in np.unique(self.value[self.feature < 0]))

    @property
    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def _leaf(self, x):
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {x.shape[-1]}")
        if x.ndim == 1:
            return int(self.value[self._leaf(x)])
        return np.array([self.value[self._leaf(row)] for row in x], dtype=np.int64)

    def leaf_boxes(self):
        """Yield (leaf id, label, lower, upper) in ascending leaf id order."""
        boxes = []
        stack = [(0, np.full(self.dim, -np.inf), np.full(self.dim, np.inf))]
        while stack:
            node, lo, hi = stack.pop()
            f = self.feature[node]
            if f < 0:
                boxes.append((int(node), int(self.value[node]), lo, hi))
                continue
            t = self.threshold[node]
            lhi = hi.copy()
            lhi[f] = min(hi[f], t)
            rlo = lo.copy()
            rlo[f] = max(lo[f], t)
            stack.append((self.left[node], lo, lhi))
            stack.append((self.right[node], rlo, hi))
        return sorted(boxes, key=lambda b: b[0])

    def decision_regions(self, target) -> list:
        target = int(target)
        if target not in self.classes:
            raise ValueError(f"unknown label {target!r}")
        regions = []
        eye = np.eye(self.dim)
        for leaf, label, lo, hi in self.leaf_boxes():
            if label != target:
                continue
            rows, rhs = [], []
            for i in range(self.dim):
                if np.isfinite(hi[i]):
                    rows.append(eye[i])
                    rhs.append(hi[i])
                if np.isfinite(lo[i]):
                    rows.append(-eye[i])
                    rhs.append(-lo[i])
            A = np.array(rows) if rows else np.zeros((0, self.dim))
            regions.append(ConstraintSet(A, np.array(rhs), tag=("leaf", leaf)))
        return regions


def _gini_from_counts(counts, totals):
    p = counts / totals[:, None]
    return 1.0 - (p * p).sum(axis=1)


def _best_split(X, y, n_classes):
    """Best (feature, threshold, weighted child impurity); ties -> lowest feature, smallest threshold."""
    n = X.shape[0]
    best = (np.inf, -1, 0.0)
    onehot = np.eye(n_classes)[y]
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = np.flatnonzero(xs[1:] > xs[:-1])
        if valid.size == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[valid]
        nl = (valid + 1).astype(np.float64)
        nr = n - nl
        right = onehot.sum(axis=0) - left
        imp = (nl * _gini_from_counts(left, nl) + nr * _gini_from_counts(right, nr)) / n
        k = int(np.argmin(imp))
        if imp[k] < best[0] - 1e-12:
            best = (float(imp[k]), f, 0.5 * (xs[valid[k]] + xs[valid[k] + 1]))
    return best


def fit_tree(data: Dataset, max_depth: int = 7, min_samples_split: int = 2) -> TreeModel:
    """Greedy CART with Gini impurity; leaf label is the majority class (ties -> lowest)."""
    if data.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    n_classes = max(data.n_classes, int(data.y.max()) + 1)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(data.n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yy = data.y[idx]
        counts = np.bincount(yy, minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if depth >= max_depth or idx.size < min_samples_split or np.count_nonzero(counts) <= 1:
            continue
        parent = 1.0 - ((counts / idx.size) ** 2).sum()
        imp, f, t = _best_split(data.X[idx], yy, n_classes)
        if f < 0 or imp >= parent - 1e-12:
            continue
        go_left = data.X[idx, f] <= t
        feature[node], threshold[node] = f, t
        li, ri = new_node(), new_node()
        left[node], right[node] = li, ri
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))
    return TreeModel(
        np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value),
        data.dim, max_depth,
    )
