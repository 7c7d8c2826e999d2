"""Random forest classifier/regressor built on greedy CART splits.

Trees grow on bootstrap samples capped at a configurable size, choosing at
each node the split with the largest impurity decrease (Gini for
classification, variance for regression) over a per-node feature subsample.
Impurity-based importances are normalized per tree and averaged, so they
are nonnegative and sum to one whenever any split exists. Tree fits depend
only on per-tree seeds spawned from the forest seed, so fitting them in any
order (or in parallel) yields the same forest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    sample_cap: int = 1000
    max_depth: int | None = None
    feature_rule: str = "sqrt"  # all | sqrt | third
    min_samples_split: int = 2
    bootstrap: bool = True

    def n_candidates(self, n_features: int) -> int:
        if self.feature_rule == "all":
            return n_features
        if self.feature_rule == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        if self.feature_rule == "third":
            return max(1, n_features // 3)
        raise ValueError(f"unknown feature rule {self.feature_rule!r}")


@dataclass
class _Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance: np.ndarray  # unnormalized impurity decrease per feature

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, rows = stack.pop()
            if len(rows) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[rows] = self.value[node]
                continue
            go_left = X[rows, f] <= self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out

    def as_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, n_features: int) -> "_Tree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
            importance=np.zeros(n_features),
        )


def _impurity(y: np.ndarray, task: str) -> float:
    if task == "classify":
        p = y.mean()
        return 2.0 * p * (1.0 - p)
    return float(y.var())


def _best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, task: str
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity decrease) over candidates, or None."""
    n = len(rows)
    node_imp = _impurity(y[rows], task)
    if node_imp <= 0.0:
        return None
    best_dec = 0.0
    best: tuple[int, float, float] | None = None
    for f in features:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xv = xs[order]
        yv = y[rows][order]
        movable = xv[1:] != xv[:-1]
        if not movable.any():
            continue
        n_left = np.arange(1, n)
        n_right = n - n_left
        if task == "classify":
            ones = np.cumsum(yv)[:-1]
            pl = ones / n_left
            pr = (ones[-1] + yv[-1] - ones) / n_right
            child = (n_left * 2 * pl * (1 - pl) + n_right * 2 * pr * (1 - pr)) / n
        else:
            s = np.cumsum(yv)
            ss = np.cumsum(yv * yv)
            sl, ssl = s[:-1], ss[:-1]
            sr, ssr = s[-1] - sl, ss[-1] - ssl
            var_l = np.maximum(ssl / n_left - (sl / n_left) ** 2, 0.0)
            var_r = np.maximum(ssr / n_right - (sr / n_right) ** 2, 0.0)
            child = (n_left * var_l + n_right * var_r) / n
        child = np.where(movable, child, np.inf)
        k = int(np.argmin(child))
        dec = node_imp - float(child[k])
        if dec > best_dec + 1e-15:
            best_dec = dec
            best = (int(f), float((xv[k] + xv[k + 1]) / 2.0), dec)
    return best


def _grow_tree(
    X: np.ndarray, y: np.ndarray, params: ForestParams, task: str, rng: np.random.Generator
) -> _Tree:
    n, d = X.shape
    k = params.n_candidates(d)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    importance = np.zeros(d)

    def leaf_value(rows: np.ndarray) -> float:
        if task == "classify":
            p = y[rows].mean()
            return 1.0 if p > 0.5 else 0.0
        return float(y[rows].mean())

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        split = None
        if len(rows) >= params.min_samples_split and (
            params.max_depth is None or depth < params.max_depth
        ):
            candidates = rng.choice(d, size=k, replace=False) if k < d else np.arange(d)
            split = _best_split(X, y, rows, candidates, task)
        if split is None:
            value[node] = leaf_value(rows)
            continue
        f, thr, dec = split
        importance[f] += (len(rows) / n) * dec
        feature[node] = f
        threshold[node] = thr
        go_left = X[rows, f] <= thr
        li, ri = new_node(), new_node()
        left[node] = li
        right[node] = ri
        stack.append((li, rows[go_left], depth + 1))
        stack.append((ri, rows[~go_left], depth + 1))

    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        importance=importance,
    )


@dataclass
class ForestModel:
    trees: list[_Tree]
    task: str
    n_features: int
    params: ForestParams
    importances: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        per_tree = []
        for t in self.trees:
            total = t.importance.sum()
            if total > 0:
                per_tree.append(t.importance / total)
        if per_tree:
            mean = np.mean(per_tree, axis=0)
            self.importances = mean / mean.sum()
        else:
            self.importances = np.zeros(self.n_features)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        votes = np.mean([t.predict(X) for t in self.trees], axis=0)
        if self.task == "classify":
            return (votes >= 0.5).astype(float)
        return votes


def fit_forest(
    X: np.ndarray,
    y: Sequence[float],
    params: ForestParams | None = None,
    task: str = "classify",
    seed: int = 0,
) -> ForestModel:
    """Fit a seeded forest; constant classification targets give one-leaf trees."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D and aligned with y")
    if len(y) < 2:
        raise ValueError("need at least 2 rows")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("forest inputs must be finite")
    if task == "classify" and not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("classification targets must be 0/1")
    if task not in ("classify", "regress"):
        raise ValueError(f"unknown task {task!r}")
    params = params or ForestParams()
    n = len(y)
    size = min(params.sample_cap, n)
    trees = []
    for ss in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=size) if params.bootstrap else np.arange(n)
        trees.append(_grow_tree(X[rows], y[rows], params, task, rng))
    return ForestModel(trees=trees, task=task, n_features=X.shape[1], params=params)
