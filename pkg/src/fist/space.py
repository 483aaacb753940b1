"""Categorical parameter spaces, samples, one-hot encoding, and tabulated datasets.

A space is an ordered list of categorical features, each with at least two
distinct string option labels.  A sample is a tuple of option indices, one per
feature.  Samples are ordered lexicographically by their index vectors; that
order is the canonical tie-breaking order everywhere else in the package.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

Sample = tuple[int, ...]

_MAX_COUNT = 2**63 - 1


class SpaceError(ValueError):
    """Malformed space definition or invalid sample."""


class TableError(ValueError):
    """Malformed dataset table."""


@dataclass(frozen=True)
class FeatureSpec:
    """One tunable knob: a name plus an ordered list of distinct option labels."""

    name: str
    options: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(str(o) for o in self.options))
        if len(self.options) < 2:
            raise SpaceError(
                f"feature {self.name!r}: needs at least 2 options, got {len(self.options)}"
            )
        if len(set(self.options)) != len(self.options):
            raise SpaceError(f"feature {self.name!r}: duplicate option labels")


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered categorical features spanning a finite Cartesian product."""

    features: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SpaceError("a space needs at least one feature")
        seen: set[str] = set()
        for f in self.features:
            if f.name in seen:
                raise SpaceError(f"duplicate feature name {f.name!r}")
            seen.add(f.name)
        size = 1
        for f in self.features:
            size *= len(f.options)
            if size > _MAX_COUNT:
                raise SpaceError("space size overflows a 64-bit count")

    # -- structure ---------------------------------------------------------

    @property
    def num_features(self) -> int:
        return len(self.features)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @cached_property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(f.options) for f in self.features)

    @cached_property
    def size(self) -> int:
        n = 1
        for c in self.counts:
            n *= c
        return n

    @cached_property
    def one_hot_width(self) -> int:
        return sum(self.counts)

    @cached_property
    def _counts_arr(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @cached_property
    def _strides(self) -> np.ndarray:
        # row-major mixed-radix strides: flat index == digits @ strides
        s = np.ones(self.num_features, dtype=np.int64)
        for q in range(self.num_features - 2, -1, -1):
            s[q] = s[q + 1] * self.counts[q + 1]
        return s

    @cached_property
    def _offsets(self) -> np.ndarray:
        # first one-hot column of every feature block
        return np.concatenate(([0], np.cumsum(self._counts_arr)[:-1]))

    # -- samples -----------------------------------------------------------

    def validate_sample(self, sample: Sequence[int]) -> Sample:
        s = tuple(int(v) for v in sample)
        if len(s) != self.num_features:
            raise SpaceError(
                f"sample has {len(s)} indices, space has {self.num_features} features"
            )
        for q, v in enumerate(s):
            if not 0 <= v < self.counts[q]:
                raise SpaceError(
                    f"feature {self.names[q]!r}: option index {v} out of range"
                )
        return s

    def enumerate(self) -> Iterator[Sample]:
        """Yield every sample exactly once, in lexicographic index order."""
        return itertools.product(*(range(n) for n in self.counts))

    def flat_index(self, sample: Sequence[int]) -> int:
        s = self.validate_sample(sample)
        return int(sum(v * int(st) for v, st in zip(s, self._strides)))

    def sample_at(self, flat: int) -> Sample:
        if not 0 <= flat < self.size:
            raise SpaceError(f"flat index {flat} out of range")
        out = []
        for st in self._strides:
            out.append(flat // int(st))
            flat %= int(st)
        return tuple(out)

    def decode_flats(self, flats) -> np.ndarray:
        """Flat indices -> (n, c) matrix of option indices."""
        f = np.asarray(flats, dtype=np.int64).reshape(-1)
        return (f[:, None] // self._strides) % self._counts_arr

    def flats_of(self, digits: np.ndarray) -> np.ndarray:
        return np.asarray(digits, dtype=np.int64) @ self._strides

    # -- one-hot encoding ----------------------------------------------------

    def encode_one_hot(self, sample: Sequence[int]) -> np.ndarray:
        s = self.validate_sample(sample)
        v = np.zeros(self.one_hot_width)
        v[self._offsets + np.asarray(s, dtype=np.int64)] = 1.0
        return v

    def encode_digits(self, digits: np.ndarray) -> np.ndarray:
        """(n, c) option-index matrix -> (n, sum(counts)) one-hot matrix."""
        d = np.asarray(digits, dtype=np.int64)
        out = np.zeros((d.shape[0], self.one_hot_width))
        out[np.arange(d.shape[0])[:, None], self._offsets + d] = 1.0
        return out

    def encode_flats(self, flats) -> np.ndarray:
        return self.encode_digits(self.decode_flats(flats))

    def decode_one_hot(self, vec: Sequence[float]) -> Sample:
        v = np.asarray(vec, dtype=float)
        if v.shape != (self.one_hot_width,):
            raise SpaceError(
                f"encoded vector has length {v.size}, expected {self.one_hot_width}"
            )
        out = []
        for q, n in enumerate(self.counts):
            block = v[self._offsets[q] : self._offsets[q] + n]
            ones = np.nonzero(block == 1.0)[0]
            if len(ones) != 1 or block.sum() != 1.0:
                raise SpaceError(f"feature {self.names[q]!r}: block is not one-hot")
            out.append(int(ones[0]))
        return tuple(out)

    # -- option labels -------------------------------------------------------

    def option_index(self, q: int, label: str) -> int:
        try:
            return self.features[q].options.index(label)
        except ValueError:
            raise SpaceError(
                f"feature {self.names[q]!r}: unknown option label {label!r}"
            ) from None

    def labels_of(self, sample: Sequence[int]) -> tuple[str, ...]:
        s = self.validate_sample(sample)
        return tuple(self.features[q].options[v] for q, v in enumerate(s))

    def sample_from_labels(self, labels: Sequence[str]) -> Sample:
        if len(labels) != self.num_features:
            raise SpaceError(
                f"got {len(labels)} labels, space has {self.num_features} features"
            )
        return tuple(self.option_index(q, lab) for q, lab in enumerate(labels))


def parse_space(text: str) -> ParameterSpace:
    """Parse a JSON space definition: {"features": [{"name": ..., "options": [...]}]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpaceError(f"invalid space document: {e.msg} (line {e.lineno})") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("features"), list):
        raise SpaceError('space document must be {"features": [...]}')
    feats = []
    for i, f in enumerate(doc["features"]):
        if not isinstance(f, dict) or "name" not in f or "options" not in f:
            raise SpaceError(f"feature #{i + 1}: needs 'name' and 'options'")
        if not isinstance(f["options"], list):
            raise SpaceError(f"feature #{i + 1}: 'options' must be a list")
        feats.append(FeatureSpec(str(f["name"]), tuple(str(o) for o in f["options"])))
    return ParameterSpace(tuple(feats))


def space_to_json(space: ParameterSpace) -> str:
    doc = {
        "features": [
            {"name": f.name, "options": list(f.options)} for f in space.features
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


def space_size(space: ParameterSpace) -> int:
    return space.size


@dataclass
class Dataset:
    """Tabulated objective values keyed by sample.

    ``complete`` is true iff every sample of the space has a row, which is
    what the ground-truth metrics require.
    """

    space: ParameterSpace
    objective_names: tuple[str, ...]
    senses: tuple[str, ...]
    rows: dict[Sample, tuple[float, ...]]

    def __post_init__(self) -> None:
        self.objective_names = tuple(self.objective_names)
        self.senses = tuple(self.senses)
        if not self.objective_names:
            raise TableError("a dataset needs at least one objective")
        if len(set(self.objective_names)) != len(self.objective_names):
            raise TableError("duplicate objective names")
        if set(self.objective_names) & set(self.space.names):
            raise TableError("objective names collide with feature names")
        if len(self.senses) != len(self.objective_names):
            raise TableError("senses and objective names differ in length")
        for s in self.senses:
            if s not in ("min", "max"):
                raise TableError(f"sense must be 'min' or 'max', got {s!r}")
        self._values_cache: dict[str, np.ndarray] = {}

    @property
    def num_objectives(self) -> int:
        return len(self.objective_names)

    @property
    def complete(self) -> bool:
        return len(self.rows) == self.space.size

    def objective_index(self, name: str) -> int:
        try:
            return self.objective_names.index(name)
        except ValueError:
            raise ValueError(f"unknown objective {name!r}") from None

    def objective_values(self, name: str) -> np.ndarray:
        """Objective column over the whole space in lexicographic sample order."""
        if not self.complete:
            raise ValueError("objective_values requires a complete dataset")
        if name not in self._values_cache:
            j = self.objective_index(name)
            out = np.empty(self.space.size)
            for s, vals in self.rows.items():
                out[self.space.flat_index(s)] = vals[j]
            self._values_cache[name] = out
        return self._values_cache[name]

    def values_matrix(self) -> np.ndarray:
        """(n_rows, k) matrix of objective values, rows in lexicographic order."""
        keys = sorted(self.rows)
        return np.asarray([self.rows[s] for s in keys], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.space.names) + list(self.objective_names))
        for s in sorted(self.rows):
            vals = self.rows[s]
            w.writerow(list(self.space.labels_of(s)) + [repr(float(v)) for v in vals])
        return buf.getvalue()

    @classmethod
    def from_csv(
        cls,
        text: str,
        space: ParameterSpace,
        senses: Sequence[str] | None = None,
    ) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise TableError("empty table") from None
        c = space.num_features
        if tuple(header[:c]) != space.names:
            raise TableError(
                f"header must start with the feature names {list(space.names)}"
            )
        names = tuple(header[c:])
        if not names:
            raise TableError("header has no objective columns")
        rows: dict[Sample, tuple[float, ...]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != c + len(names):
                raise TableError(f"row {lineno}: expected {c + len(names)} fields")
            try:
                sample = space.sample_from_labels(row[:c])
            except SpaceError as e:
                raise TableError(f"row {lineno}: {e}") from None
            if sample in rows:
                raise TableError(f"row {lineno}: duplicate sample")
            try:
                vals = tuple(float(v) for v in row[c:])
            except ValueError:
                raise TableError(f"row {lineno}: non-numeric objective value") from None
            for v in vals:
                if not np.isfinite(v):
                    raise TableError(f"row {lineno}: non-finite objective value")
            rows[sample] = vals
        if senses is None:
            senses = ("min",) * len(names)
        return cls(space=space, objective_names=names, senses=tuple(senses), rows=rows)


def load_table(
    csv_text: str, space: ParameterSpace, senses: Sequence[str] | None = None
) -> Dataset:
    return Dataset.from_csv(csv_text, space, senses)
