"""Random forest of CART classification trees with Gini splits.

Randomness comes from :class:`SplitMix64`. The master generator seeded with
``seed`` spawns one child per tree (in tree order); each tree then draws, in
order: its bootstrap sample (``n`` calls to ``below(n)``), then at every node
visited depth-first, left child first, a lazy Fisher-Yates permutation of the
feature indices. The first ``mtry`` permuted features are the split
candidates; if none of them admits a valid split, further features are drawn
from the same permutation one at a time until one does or all are exhausted.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import _kernels
from ..errors import NonFinite
from .labels import encode_labels
from .model import TrainedModel
from .rng import SplitMix64


class _TreeBuilder:
    def __init__(self, X, y, n_classes, max_depth, min_leaf, mtry, rng):
        self.X, self.y = X, y
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.rng = rng
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _new_node(self):
        for lst, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1), (self.value, 0)):
            lst.append(v)
        return len(self.feature) - 1

    def _choose_split(self, idx):
        d = self.X.shape[1]
        perm = list(range(d))
        Xn, yn = self.X[idx], self.y[idx]
        drawn = 0

        def draw(k):
            nonlocal drawn
            out = []
            for _ in range(k):
                j = drawn + self.rng.below(d - drawn)
                perm[drawn], perm[j] = perm[j], perm[drawn]
                out.append(perm[drawn])
                drawn += 1
            return out

        cand = draw(min(self.mtry, d))
        f, thr, _ = _kernels.best_split(Xn, yn, self.n_classes, cand, self.min_leaf)
        while f < 0 and drawn < d:
            f, thr, _ = _kernels.best_split(Xn, yn, self.n_classes, draw(1), self.min_leaf)
        return f, thr

    def build(self, idx, depth=0):
        node = self._new_node()
        counts = np.bincount(self.y[idx], minlength=self.n_classes)
        self.value[node] = int(np.argmax(counts))
        if (
            np.count_nonzero(counts) <= 1
            or (self.max_depth is not None and depth >= self.max_depth)
            or len(idx) < 2 * self.min_leaf
        ):
            return node
        f, thr = self._choose_split(idx)
        if f < 0:
            return node
        go_left = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node

    def arrays(self):
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=np.float64),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "value": np.array(self.value, dtype=np.int64),
        }


def build_tree(X, y, n_classes, max_depth=None, min_leaf=1, mtry=None, rng=None, bootstrap=True):
    """Grow one tree; returns its node arrays (``feature == -1`` marks a leaf)."""
    n, d = X.shape
    rng = rng or SplitMix64(0)
    if bootstrap:
        idx = np.array([rng.below(n) for _ in range(n)], dtype=np.int64)
    else:
        idx = np.arange(n)
    builder = _TreeBuilder(X, y, n_classes, max_depth, min_leaf, d if mtry is None else mtry, rng)
    builder.build(idx)
    return builder.arrays()


def tree_apply(tree, X) -> np.ndarray:
    """Leaf node index reached by each row of ``X``."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    feat, thr, left, right = tree["feature"], tree["threshold"], tree["left"], tree["right"]
    active = feat[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nd = node[rows]
        go_left = X[rows, feat[nd]] <= thr[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active[rows] = feat[node[rows]] >= 0
    return node


def tree_predict(tree, X) -> np.ndarray:
    return tree["value"][tree_apply(tree, X)]


def train_forest(
    X,
    y,
    n_trees=100,
    max_depth=None,
    min_leaf=1,
    mtry=None,
    seed=0,
    labels=None,
    bootstrap=True,
    jobs=1,
) -> TrainedModel:
    """Bagged CART forest. ``mtry`` defaults to ``ceil(sqrt(d))``.

    A single label is tolerated: every tree is then a one-leaf constant
    predictor. Results are identical for any ``jobs``.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training features contain non-finite values")
    n, d = X.shape
    if n < 2 * min_leaf:
        raise ValueError(f"need at least {2 * min_leaf} rows for min_leaf={min_leaf}")
    labels, codes = encode_labels(y, labels, allow_single=True)
    mtry = max(1, math.ceil(math.sqrt(d))) if mtry is None else int(mtry)
    rngs = SplitMix64(seed).spawn(n_trees)

    def grow(rng):
        return build_tree(X, codes, len(labels), max_depth, min_leaf, mtry, rng, bootstrap)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            trees = list(ex.map(grow, rngs))
    else:
        trees = [grow(r) for r in rngs]
    params = {
        "n_features": d,
        "trees": trees,
        "max_depth": max_depth,
        "min_leaf": min_leaf,
        "mtry": mtry,
    }
    return TrainedModel("forest", labels, params)
