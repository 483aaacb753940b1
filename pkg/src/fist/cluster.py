"""Partition of a space into clusters of samples agreeing on the masked features.

Clusters are never materialized as member lists; membership, enumeration, and
uniform draws all use mixed-radix arithmetic over the masked and unmasked
feature positions, so spaces with millions of samples stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .importance import MaskError
from .space import Dataset, ParameterSpace, Sample


def cluster_key(sample: Sequence[int], mask: Sequence[bool]) -> tuple[int, ...]:
    """Projection of a sample onto the masked feature positions."""
    m = np.asarray(mask, dtype=bool)
    s = tuple(sample)
    return tuple(s[q] for q in np.nonzero(m)[0])


def _radix_strides(radices: np.ndarray) -> np.ndarray:
    s = np.ones(len(radices), dtype=np.int64)
    for q in range(len(radices) - 2, -1, -1):
        s[q] = s[q + 1] * radices[q + 1]
    return s


class Partition:
    """Disjoint clusters of a space keyed by values on the masked features.

    Every cluster has exactly ``cluster_size`` members (the product of the
    unmasked option counts), and there are ``num_clusters`` of them (the
    product of the masked option counts).
    """

    def __init__(self, space: ParameterSpace, mask: Sequence[bool]):
        m = np.asarray(mask, dtype=bool)
        if m.shape != (space.num_features,):
            raise MaskError(
                f"mask length {m.size} does not match {space.num_features} features"
            )
        if not m.any() or m.all():
            raise MaskError("mask must select at least one and fewer than all features")
        self.space = space
        self.mask = m
        counts = np.asarray(space.counts, dtype=np.int64)
        self.masked = np.nonzero(m)[0]
        self.unmasked = np.nonzero(~m)[0]
        self._masked_counts = counts[self.masked]
        self._unmasked_counts = counts[self.unmasked]
        self._masked_strides = _radix_strides(self._masked_counts)
        self._unmasked_strides = _radix_strides(self._unmasked_counts)
        self._space_strides = space._strides
        self.num_clusters = int(self._masked_counts.prod())
        self.cluster_size = int(self._unmasked_counts.prod())

    def cluster_key_of(self, sample: Sequence[int]) -> tuple[int, ...]:
        return cluster_key(self.space.validate_sample(sample), self.mask)

    def cluster_id(self, sample: Sequence[int]) -> int:
        s = np.asarray(self.space.validate_sample(sample), dtype=np.int64)
        return int(s[self.masked] @ self._masked_strides)

    def member_id(self, sample: Sequence[int]) -> int:
        s = np.asarray(self.space.validate_sample(sample), dtype=np.int64)
        return int(s[self.unmasked] @ self._unmasked_strides)

    def cluster_ids_of_flats(self, flats) -> np.ndarray:
        digits = self.space.decode_flats(flats)
        return digits[:, self.masked] @ self._masked_strides

    def flats_for(self, cluster_ids, member_ids) -> np.ndarray:
        """Flat sample indices for (cluster, member) id pairs; broadcasts."""
        cid = np.asarray(cluster_ids, dtype=np.int64)
        mid = np.asarray(member_ids, dtype=np.int64)
        cid, mid = np.broadcast_arrays(cid, mid)
        mdig = (cid[..., None] // self._masked_strides) % self._masked_counts
        udig = (mid[..., None] // self._unmasked_strides) % self._unmasked_counts
        return (
            mdig @ self._space_strides[self.masked]
            + udig @ self._space_strides[self.unmasked]
        )

    def sample_of(self, cluster_id: int, member_id: int) -> Sample:
        flat = int(self.flats_for(cluster_id, member_id))
        return self.space.sample_at(flat)

    def members_of(self, cluster_id: int) -> np.ndarray:
        """All member flat indices of one cluster, ascending."""
        if not 0 <= cluster_id < self.num_clusters:
            raise ValueError(f"cluster id {cluster_id} out of range")
        return self.flats_for(cluster_id, np.arange(self.cluster_size))

    def members_of_many(self, cluster_ids) -> np.ndarray:
        """Member flat indices of several clusters, sorted ascending."""
        cid = np.asarray(cluster_ids, dtype=np.int64)
        flats = self.flats_for(
            np.repeat(cid, self.cluster_size),
            np.tile(np.arange(self.cluster_size), len(cid)),
        )
        return np.sort(flats)


def partition(space: ParameterSpace, mask: Sequence[bool]) -> Partition:
    return Partition(space, mask)


class ApproxLabelStore:
    """One representative label per explored cluster, virtually shared by
    every member of that cluster (pseudo-labeling)."""

    def __init__(self, part: Partition):
        self.partition = part
        self._entries: dict[int, tuple[Sample, tuple[float, ...]]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, cluster_id: int) -> bool:
        return cluster_id in self._entries

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.asarray(sorted(self._entries), dtype=np.int64)

    @property
    def virtual_count(self) -> int:
        return len(self._entries) * self.partition.cluster_size

    def representative(self, cluster_id: int) -> tuple[Sample, tuple[float, ...]]:
        return self._entries[cluster_id]

    def apply(self, representative: Sequence[int], labels: Sequence[float]) -> int:
        """Label the representative's whole cluster; returns the cluster id."""
        cid = self.partition.cluster_id(representative)
        if cid in self._entries:
            raise ValueError(f"cluster {cid} already has a representative label")
        self._entries[cid] = (
            tuple(int(v) for v in representative),
            tuple(float(v) for v in labels),
        )
        return cid

    def virtual_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """(flats, labels) for every member of every labeled cluster.

        Rows are ordered by cluster id then member id, so the training set is
        reproducible.
        """
        ids = sorted(self._entries)
        if not ids:
            return np.empty(0, dtype=np.int64), np.empty((0, 0))
        size = self.partition.cluster_size
        flats = self.partition.flats_for(
            np.repeat(np.asarray(ids, dtype=np.int64), size),
            np.tile(np.arange(size), len(ids)),
        )
        labels = np.asarray([self._entries[i][1] for i in ids], dtype=float)
        return flats, np.repeat(labels, size, axis=0)


@dataclass(frozen=True)
class SigmaResult:
    sigma_random: float
    sigma_in_cluster: float
    sigma_cross_cluster: float


def _subset_draws(rng: np.random.Generator, n_items: int, g: int, trials: int):
    """Yield (t, g) matrices of distinct uniform indices into range(n_items)."""
    chunk = max(1, 2_000_000 // max(1, n_items))
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        r = rng.random((t, n_items))
        yield np.argpartition(r, g - 1, axis=1)[:, :g]
        done += t


def sigma_analysis(
    data: Dataset,
    part: Partition,
    objective: str,
    group_size: int = 10,
    trials: int = 10_000,
    rng: np.random.Generator | None = None,
) -> SigmaResult:
    """Mean population standard deviation of objective values within sample
    groups drawn uniformly at random, from a single cluster, and across
    distinct clusters (one member per cluster).
    """
    if not data.complete:
        raise ValueError("sigma analysis requires a complete dataset")
    if group_size < 2:
        raise ValueError("group size must be at least 2")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if rng is None:
        rng = np.random.default_rng()
    y = data.objective_values(objective)
    n = data.space.size
    g = group_size
    if n < g:
        raise ValueError("space smaller than the group size")
    if part.cluster_size < g:
        raise ValueError("no cluster is large enough for in-cluster draws")
    if part.num_clusters < g:
        raise ValueError("fewer clusters than the group size for cross-cluster draws")

    acc = 0.0
    for idx in _subset_draws(rng, n, g, trials):
        acc += float(np.std(y[idx], axis=1).sum())
    sigma_random = acc / trials

    acc = 0.0
    done = 0
    for members in _subset_draws(rng, part.cluster_size, g, trials):
        t = members.shape[0]
        cids = rng.integers(0, part.num_clusters, size=t)
        flats = part.flats_for(cids[:, None], members)
        acc += float(np.std(y[flats], axis=1).sum())
        done += t
    sigma_in = acc / trials

    acc = 0.0
    for cids in _subset_draws(rng, part.num_clusters, g, trials):
        t = cids.shape[0]
        members = rng.integers(0, part.cluster_size, size=(t, g))
        flats = part.flats_for(cids, members)
        acc += float(np.std(y[flats], axis=1).sum())
    sigma_cross = acc / trials

    return SigmaResult(sigma_random, sigma_in, sigma_cross)
