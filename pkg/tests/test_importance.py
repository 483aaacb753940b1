import statistics

import numpy as np
import pytest

from fist.importance import (
    MaskError,
    aggregate_importance,
    feature_importance,
    importance_mask,
    importance_rank,
)
from fist.space import Dataset, FeatureSpec, ParameterSpace


def make_space(counts):
    return ParameterSpace(
        tuple(
            FeatureSpec(f"f{i}", tuple(str(j) for j in range(n)))
            for i, n in enumerate(counts)
        )
    )


def make_dataset(counts, labels):
    sp = make_space(counts)
    rows = {s: (float(v),) for s, v in zip(sp.enumerate(), labels)}
    return Dataset(sp, ("y",), ("min",), rows)


def importance_oracle(dataset, objective="y"):
    """Explicit subgroup enumeration with population variances."""
    space = dataset.space
    j = dataset.objective_index(objective)
    c = space.num_features
    out = []
    for q in range(c):
        groups = {}
        for s, vals in dataset.rows.items():
            key = s[:q] + s[q + 1 :]
            groups.setdefault(key, []).append(vals[j])
        total = 0.0
        for members in groups.values():
            if len(members) >= 2:
                total += statistics.pvariance(members)
        out.append(total)
    return np.asarray(out)


class TestFeatureImportance:
    def test_worked_example(self):
        ds = make_dataset((2, 2), [1, 2, 3, 4])
        I = feature_importance(ds, "y")
        assert I.tolist() == [2.0, 0.5]

    def test_constant_labels(self):
        ds = make_dataset((2, 2, 2), [5.0] * 8)
        assert feature_importance(ds, "y").tolist() == [0.0, 0.0, 0.0]

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            ds = make_dataset((2, 2, 2), rng.standard_normal(8))
            assert np.allclose(feature_importance(ds, "y"), importance_oracle(ds))

    def test_incomplete_dataset_singletons_contribute_zero(self):
        sp = make_space((2, 2))
        # only samples (0,0),(0,1),(1,0): feature 1 has one 2-row subgroup,
        # feature 2's subgroups are {1,2} and the singleton {3}
        rows = {(0, 0): (1.0,), (0, 1): (2.0,), (1, 0): (3.0,)}
        ds = Dataset(sp, ("y",), ("min",), rows)
        I = feature_importance(ds, "y")
        oracle = importance_oracle(ds)
        assert np.allclose(I, oracle)
        assert I[0] == statistics.pvariance([1.0, 3.0])
        assert I[1] == statistics.pvariance([1.0, 2.0])

    def test_unknown_objective(self):
        ds = make_dataset((2, 2), [1, 2, 3, 4])
        with pytest.raises(ValueError, match="unknown objective"):
            feature_importance(ds, "nope")

    def test_too_few_rows(self):
        sp = make_space((2, 2))
        ds = Dataset(sp, ("y",), ("min",), {(0, 0): (1.0,)})
        with pytest.raises(ValueError, match="2 labeled rows"):
            feature_importance(ds, "y")

    # -- invariants ---------------------------------------------------------

    def test_label_scaling_scales_importance_quadratically(self):
        rng = np.random.default_rng(1)
        labels = rng.standard_normal(12)
        ds1 = make_dataset((2, 3, 2), labels)
        ds2 = make_dataset((2, 3, 2), 3.0 * labels)
        I1 = feature_importance(ds1, "y")
        I2 = feature_importance(ds2, "y")
        assert np.allclose(I2, 9.0 * I1)
        assert importance_rank(I1) == importance_rank(I2)

    def test_feature_permutation_permutes_importance(self):
        rng = np.random.default_rng(2)
        counts = (2, 3, 2)
        sp = make_space(counts)
        labels = {s: float(rng.standard_normal()) for s in sp.enumerate()}
        ds = Dataset(sp, ("y",), ("min",), {s: (v,) for s, v in labels.items()})
        I = feature_importance(ds, "y")
        perm = [2, 0, 1]  # new order of old features
        sp2 = make_space(tuple(counts[p] for p in perm))
        rows2 = {
            tuple(s[p] for p in perm): (v,) for s, v in labels.items()
        }
        I2 = feature_importance(Dataset(sp2, ("y",), ("min",), rows2), "y")
        assert np.allclose(I2, I[perm])

    def test_irrelevant_feature_has_zero_importance(self):
        sp = make_space((2, 2, 3))
        # label depends on features 0 and 1 only
        rows = {s: (float(s[0] * 2 + s[1] * 7),) for s in sp.enumerate()}
        ds = Dataset(sp, ("y",), ("min",), rows)
        I = feature_importance(ds, "y")
        assert I[2] == 0.0
        assert I[0] > 0 and I[1] > 0


class TestImportanceMask:
    def test_worked_example(self):
        assert importance_mask([2.0, 0.5]).tolist() == [True, False]

    def test_all_equal_median_degenerate(self):
        with pytest.raises(MaskError, match="top_k"):
            importance_mask([1.0, 1.0, 1.0])

    def test_top_k(self):
        assert importance_mask([3.0, 1.0, 2.0], "top_k", k=2).tolist() == [
            True,
            False,
            True,
        ]

    def test_top_k_tie_breaks_to_lower_index(self):
        assert importance_mask([1.0, 1.0, 1.0], "top_k", k=1).tolist() == [
            True,
            False,
            False,
        ]

    def test_top_k_bounds(self):
        with pytest.raises(ValueError):
            importance_mask([1.0, 2.0], "top_k", k=2)

    def test_even_length_median_is_midpoint(self):
        # median of [1,2,3,4] is 2.5: two bits set
        assert importance_mask([1.0, 2.0, 3.0, 4.0]).tolist() == [
            False,
            False,
            True,
            True,
        ]


class TestImportanceRank:
    def test_worked_example(self):
        assert importance_rank([2.0, 0.5]) == [2, 1]

    def test_ties_break_by_index(self):
        assert importance_rank([1.0, 1.0, 1.0]) == [1, 2, 3]

    def test_matches_reference_sort(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.standard_normal(10)
            expected = [
                i + 1 for i, _ in sorted(enumerate(v), key=lambda t: (t[1], t[0]))
            ]
            assert importance_rank(v) == expected


class TestAggregateImportance:
    def test_single_prior_normalizes(self):
        out = aggregate_importance([[2.0, 0.5]])
        assert np.allclose(out, [0.8, 0.2])

    def test_identical_priors_idempotent(self):
        a = aggregate_importance([[2.0, 0.5]])
        b = aggregate_importance([[2.0, 0.5], [2.0, 0.5]])
        assert np.allclose(a, b)

    def test_opposing_priors_average(self):
        out = aggregate_importance([[2.0, 0.5], [0.5, 2.0]])
        assert np.allclose(out, [0.5, 0.5])

    def test_zero_vector_contributes_uniform(self):
        out = aggregate_importance([[0.0, 0.0]])
        assert np.allclose(out, [0.5, 0.5])

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError, match="mismatched"):
            aggregate_importance([[1.0, 2.0], [1.0, 2.0, 3.0]])
