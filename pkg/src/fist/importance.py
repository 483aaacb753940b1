"""Variance-based feature importance, importance masks, ranks, and prior aggregation.

Importance of a feature is measured by controlling every other feature: rows
that agree on all other features form a measurement subgroup, and the feature's
importance is the sum over subgroups of the population variance of the
objective inside the subgroup.  Subgroups with fewer than two rows carry no
information and contribute zero.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .space import Dataset


class MaskError(ValueError):
    """The requested rule would produce a degenerate (all-or-nothing) mask."""


def feature_importance(data: Dataset, objective: str) -> np.ndarray:
    """Per-feature importance vector (length c, entries >= 0)."""
    if len(data.rows) < 2:
        raise ValueError("feature importance needs at least 2 labeled rows")
    j = data.objective_index(objective)
    space = data.space
    samples = np.asarray(list(data.rows.keys()), dtype=np.int64)
    y = np.asarray([v[j] for v in data.rows.values()], dtype=float)
    c = space.num_features
    counts = np.asarray(space.counts, dtype=np.int64)
    out = np.zeros(c)
    for q in range(c):
        others = np.delete(samples, q, axis=1)
        radices = np.delete(counts, q)
        strides = np.ones(c - 1, dtype=np.int64)
        for r in range(c - 3, -1, -1):
            strides[r] = strides[r + 1] * radices[r + 1]
        if c == 1:
            keys = np.zeros(len(samples), dtype=np.int64)
        else:
            keys = others @ strides
        _, gid = np.unique(keys, return_inverse=True)
        cnt = np.bincount(gid)
        means = np.bincount(gid, weights=y) / cnt
        css = np.bincount(gid, weights=(y - means[gid]) ** 2)
        var = css / cnt
        out[q] = float(var[cnt >= 2].sum())
    return out


def importance_mask(
    values: Sequence[float], rule: str = "median", k: int | None = None
) -> np.ndarray:
    """Boolean selector of the important features.

    rule="median" marks entries strictly above the median (midpoint convention
    for even length); rule="top_k" marks the k largest, breaking ties in favor
    of the lower feature index.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("importance vector must be 1-D with length >= 2")
    if np.isnan(v).any():
        raise ValueError("importance vector contains NaN")
    if rule == "median":
        bits = v > np.median(v)
        if not bits.any() or bits.all():
            raise MaskError(
                "median rule yields a degenerate mask (heavy ties); use rule='top_k'"
            )
        return bits
    if rule == "top_k":
        if k is None or not 1 <= k <= v.size - 1:
            raise ValueError(f"top_k requires 1 <= k <= {v.size - 1}")
        order = np.argsort(-v, kind="stable")
        bits = np.zeros(v.size, dtype=bool)
        bits[order[:k]] = True
        return bits
    raise ValueError(f"unknown mask rule {rule!r}")


def importance_rank(values: Sequence[float]) -> list[int]:
    """1-based feature indices ordered from least to most important.

    Ties are broken in favor of the lower feature index.
    """
    v = np.asarray(values, dtype=float)
    return [int(i) + 1 for i in np.argsort(v, kind="stable")]


def aggregate_importance(priors: Sequence[Sequence[float]]) -> np.ndarray:
    """Combine importance vectors from several prior designs.

    Each vector is normalized to unit sum (an all-zero vector contributes a
    uniform one), then the normalized vectors are averaged entrywise.
    """
    arrs = [np.asarray(p, dtype=float) for p in priors]
    if not arrs:
        raise ValueError("need at least one importance vector")
    c = arrs[0].size
    for a in arrs:
        if a.shape != (c,):
            raise ValueError("importance vectors have mismatched lengths")
    normed = []
    for a in arrs:
        s = a.sum()
        normed.append(a / s if s > 0 else np.full(c, 1.0 / c))
    return np.mean(normed, axis=0)
