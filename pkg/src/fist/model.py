"""Regression trees over binary one-hot columns, gradient boosting, random
forests, and the iteration-indexed depth ramp.

All split decisions are exact greedy over every column at the fixed threshold
0.5 (inputs are one-hot, so each column is a clean 0/1 partition).  Node gain
is the second-order formula

    gain = 1/2 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))

with G, H the sums of gradients and hessians over the node; a node splits only
when the best gain is strictly positive and both children keep at least
``min_leaf`` rows.  Leaf output is -G/(H+lam).  Ties in gain go to the lowest
column index.

The recursive builders and tree walkers are numba kernels; refinement loops
refit surrogates hundreds of times per run, and the compiled kernels keep that
affordable on one core.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class ModelError(ValueError):
    """Empty training set or dimension mismatch."""


@njit(cache=True)
def _build_kernel(X, g, h, max_depth, min_leaf, lam, noise, n_sub):
    n, n_cols = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    rows = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    row_leaf = np.zeros(n, dtype=np.int64)
    cols = np.arange(n_cols)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        depth = stack_depth[sp]
        n_rows = hi - lo

        g_tot = 0.0
        h_tot = 0.0
        for i in range(lo, hi):
            g_tot += g[rows[i]]
            h_tot += h[rows[i]]

        best_col = -1
        best_gain = 0.0
        best_cr = 0
        if depth < max_depth and n_rows >= 2 * min_leaf:
            parent = g_tot * g_tot / (h_tot + lam)
            if n_sub < n_cols:
                order = np.argsort(noise[node % noise.shape[0]])
                allowed = np.sort(order[:n_sub])
            else:
                allowed = cols
            for ci in range(len(allowed)):
                col = allowed[ci]
                # both sides summed directly so complementary columns get
                # bitwise-equal gains and the tie resolves to the lower index
                g_r = 0.0
                h_r = 0.0
                g_l = 0.0
                h_l = 0.0
                c_r = 0
                for i in range(lo, hi):
                    r = rows[i]
                    if X[r, col] > 0.5:
                        g_r += g[r]
                        h_r += h[r]
                        c_r += 1
                    else:
                        g_l += g[r]
                        h_l += h[r]
                c_l = n_rows - c_r
                if c_r < min_leaf or c_l < min_leaf:
                    continue
                gain = 0.5 * (
                    g_l * g_l / (h_l + lam) + g_r * g_r / (h_r + lam) - parent
                )
                if gain > best_gain:  # strict: ties keep the lowest column
                    best_gain = gain
                    best_col = col
                    best_cr = c_r

        if best_col < 0:
            value[node] = -g_tot / (h_tot + lam)
            for i in range(lo, hi):
                row_leaf[rows[i]] = node
            continue

        # stable partition: left rows (column == 0) first
        c_l = n_rows - best_cr
        a = 0
        b = c_l
        for i in range(lo, hi):
            r = rows[i]
            if X[r, best_col] > 0.5:
                tmp[b] = r
                b += 1
            else:
                tmp[a] = r
                a += 1
        for i in range(n_rows):
            rows[lo + i] = tmp[i]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_col
        left[node] = left_id
        right[node] = right_id
        stack_node[sp] = right_id
        stack_lo[sp] = lo + c_l
        stack_hi[sp] = hi
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = left_id
        stack_lo[sp] = lo
        stack_hi[sp] = lo + c_l
        stack_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        row_leaf,
    )


@njit(cache=True)
def _predict_kernel(feature, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] > 0.5:
                node = right[node]
            else:
                node = left[node]
        out[i] = value[node]
    return out


@dataclass
class RegressionTree:
    feature: np.ndarray  # (nodes,) int32, -1 at leaves
    left: np.ndarray  # (nodes,) int32 child ids, -1 at leaves
    right: np.ndarray
    value: np.ndarray  # (nodes,) float64 leaf outputs, 0 at internal nodes
    n_columns: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_columns)
        return _predict_kernel(self.feature, self.left, self.right, self.value, X)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_columns": self.n_columns,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            n_columns=int(d["n_columns"]),
        )


def _as_matrix(X, n_columns: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ModelError("X must be a 2-D matrix")
    if n_columns is not None and X.shape[1] != n_columns:
        raise ModelError(f"X has {X.shape[1]} columns, model expects {n_columns}")
    return X


_NO_NOISE = np.zeros((1, 1))


def _grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    max_depth: int,
    min_leaf: int,
    lam: float,
    rng: np.random.Generator | None = None,
    feature_frac: float = 1.0,
) -> tuple[RegressionTree, np.ndarray]:
    """Returns the tree plus each training row's leaf node id (which lets
    boosting update its running predictions without re-walking the tree)."""
    n, n_cols = X.shape
    if n == 0:
        raise ModelError("empty training set")
    if feature_frac >= 1.0:
        n_sub = n_cols
        noise = _NO_NOISE
    else:
        n_sub = max(1, int(round(feature_frac * n_cols)))
        noise = rng.random((2 * n + 1, n_cols))
    feature, left, right, value, row_leaf = _build_kernel(
        X,
        np.ascontiguousarray(g, dtype=float),
        np.ascontiguousarray(h, dtype=float),
        max_depth,
        min_leaf,
        float(lam),
        noise,
        n_sub,
    )
    tree = RegressionTree(
        feature=feature, left=left, right=right, value=value, n_columns=n_cols
    )
    return tree, row_leaf


def fit_tree(
    X,
    y=None,
    gradients=None,
    hessians=None,
    *,
    max_depth: int,
    min_leaf: int = 1,
    lam: float = 0.0,
    feature_frac: float = 1.0,
    rng: np.random.Generator | None = None,
) -> RegressionTree:
    """Fit one exact-greedy regression tree.

    Pass squared-error targets ``y`` (equivalent to gradients ``-y`` with unit
    hessians, i.e. a zero base prediction, so leaves hold side means when
    lam=0), or pass explicit ``gradients``/``hessians``.
    """
    X = _as_matrix(X)
    if gradients is None:
        if y is None:
            raise ModelError("supply either y or gradients")
        g = -np.asarray(y, dtype=float)
        h = np.ones(len(g))
    else:
        g = np.asarray(gradients, dtype=float)
        h = np.ones(len(g)) if hessians is None else np.asarray(hessians, dtype=float)
    if len(g) != len(X) or len(h) != len(X):
        raise ModelError("X and gradient lengths differ")
    if max_depth < 0:
        raise ModelError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ModelError("min_leaf must be >= 1")
    if feature_frac < 1.0 and rng is None:
        raise ModelError("feature subsampling needs an rng")
    tree, _ = _grow_tree(X, g, h, max_depth, min_leaf, lam, rng, feature_frac)
    return tree


@dataclass
class GbrtEnsemble:
    """Gradient-boosted trees for squared error: prediction is
    base_score + learning_rate * sum of tree outputs."""

    base_score: float
    trees: list[RegressionTree]
    learning_rate: float
    lam: float
    n_columns: int

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_columns)
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += self.learning_rate * _predict_kernel(
                t.feature, t.left, t.right, t.value, X
            )
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "gbrt",
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "lam": self.lam,
            "n_columns": self.n_columns,
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GbrtEnsemble":
        return cls(
            base_score=float(d["base_score"]),
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            learning_rate=float(d["learning_rate"]),
            lam=float(d["lam"]),
            n_columns=int(d["n_columns"]),
        )


def fit_gbrt(
    X,
    y,
    *,
    rounds: int = 50,
    learning_rate: float = 0.1,
    max_depth: int = 6,
    lam: float = 1.0,
    min_leaf: int = 1,
) -> GbrtEnsemble:
    """Boost ``rounds`` trees on the squared-error gradients g = pred - y, h = 1."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if len(y) != len(X):
        raise ModelError("X and y lengths differ")
    if len(y) == 0:
        raise ModelError("empty training set")
    if rounds < 1:
        raise ModelError("rounds must be >= 1")
    base = float(np.mean(y))
    pred = np.full(len(y), base)
    h = np.ones(len(y))
    trees: list[RegressionTree] = []
    for _ in range(rounds):
        tree, row_leaf = _grow_tree(X, pred - y, h, max_depth, min_leaf, lam)
        pred += learning_rate * tree.value[row_leaf]
        trees.append(tree)
    return GbrtEnsemble(
        base_score=base,
        trees=trees,
        learning_rate=learning_rate,
        lam=lam,
        n_columns=X.shape[1],
    )


@dataclass
class RandomForest:
    """Bagged trees; prediction is the mean of the per-tree outputs."""

    trees: list[RegressionTree]
    n_columns: int

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_columns)
        out = np.zeros(len(X))
        for t in self.trees:
            out += _predict_kernel(t.feature, t.left, t.right, t.value, X)
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "kind": "random_forest",
            "n_columns": self.n_columns,
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls(
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            n_columns=int(d["n_columns"]),
        )


def fit_forest(
    X,
    y,
    *,
    n_trees: int = 20,
    max_depth: int = 10,
    min_leaf: int = 1,
    feature_frac: float = 1 / 3,
    bootstrap: bool = True,
    rng=None,
) -> RandomForest:
    """Fit a random forest: per-tree bootstrap rows (size = training-set size)
    plus per-split random feature subsets, all driven by the seeded rng."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if len(y) != len(X):
        raise ModelError("X and y lengths differ")
    if len(y) == 0:
        raise ModelError("empty training set")
    if n_trees < 1:
        raise ModelError("n_trees must be >= 1")
    if not 0.0 < feature_frac <= 1.0:
        raise ModelError("feature_frac must be in (0, 1]")
    rng = np.random.default_rng(rng)
    n = len(y)
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree, _ = _grow_tree(
            np.ascontiguousarray(X[idx]),
            -y[idx],
            np.ones(n),
            max_depth,
            min_leaf,
            0.0,
            rng,
            feature_frac,
        )
        trees.append(tree)
    return RandomForest(trees=trees, n_columns=X.shape[1])


@dataclass(frozen=True)
class DepthSchedule:
    """Linear ramp of the maximum tree depth across refinement iterations."""

    d_init: int
    d_final: int
    total_iterations: int

    def __post_init__(self) -> None:
        if not 1 <= self.d_init <= self.d_final:
            raise ValueError("need 1 <= d_init <= d_final")
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")

    def depth_at(self, i: int) -> int:
        """Depth for iteration i in 1..total_iterations (round half up)."""
        T = self.total_iterations
        if not 1 <= i <= T:
            raise ValueError(f"iteration {i} outside 1..{T}")
        if T == 1:
            return self.d_final
        x = self.d_init + (self.d_final - self.d_init) * (i - 1) / (T - 1)
        return int(math.floor(x + 0.5))


def depth_at(schedule: DepthSchedule, i: int) -> int:
    return schedule.depth_at(i)
