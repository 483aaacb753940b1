"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The end-to-end
comparisons (criteria 4 and 5) replay 100 seeded trials per strategy on the
frozen 1728-sample benchmark space and take a few minutes on one core.
"""

import numpy as np
import pytest

from fist.cluster import partition, sigma_analysis
from fist.explore import TuneConfig, run
from fist.harness import (
    BenchConfig,
    EvaluatorBinding,
    SyntheticSpec,
    bench,
    runlog_to_jsonl,
    synth_space,
)
from fist.importance import feature_importance, importance_mask
from fist.metrics import adrs, pareto_front
from fist.model import fit_gbrt
from fist.space import Dataset, FeatureSpec, ParameterSpace

# frozen desk-scale benchmark: strong decaying main effects, importance-scaled
# pairwise interactions, light hash noise
BENCH_SPEC = SyntheticSpec(
    counts=(2, 2, 2, 3, 3, 3, 2, 2, 2), gamma=0.6, beta=2.0, eps=0.1, seed=7
)


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def mean_metric(spec, strategies, metric, seeds=100, budget=60):
    config = BenchConfig(
        spec=spec, strategies=tuple(strategies), budgets=(budget,), trials=seeds
    )
    _, summary = bench(config, out_dir=None, plots=False, write_logs=False)
    return {
        s["strategy"]: s["mean"] for s in summary if s["metric"] == metric
    }


def test_criterion_1_worked_example_exact():
    space = ParameterSpace(
        (FeatureSpec("a", ("0", "1")), FeatureSpec("b", ("0", "1")))
    )
    rows = {(0, 0): (1.0,), (0, 1): (2.0,), (1, 0): (3.0,), (1, 1): (4.0,)}
    data = Dataset(space, ("quality",), ("min",), rows)
    importance = feature_importance(data, "quality")
    mask = importance_mask(importance)
    ok = importance.tolist() == [2.0, 0.5] and mask.tolist() == [True, False]
    report(1, ok, f"importance={importance.tolist()} mask={mask.astype(int).tolist()}")


def test_criterion_2_importance_recovery():
    data = synth_space(SyntheticSpec(counts=BENCH_SPEC.counts, gamma=0.6, seed=0))
    assert data.space.size == 1728
    importance = feature_importance(data, "obj1")
    inversions = int(np.sum(np.diff(importance) >= 0))
    report(2, inversions == 0, f"importance strictly decreasing, inversions={inversions}")


def test_criterion_3_sigma_ordering():
    spec = SyntheticSpec(counts=BENCH_SPEC.counts, gamma=0.5, beta=0.05, seed=11)
    target = synth_space(spec)
    sibling = synth_space(spec, seed=spec.seed + 1)
    learned_mask = importance_mask(feature_importance(sibling, "obj1"))
    true_mask = importance_mask(feature_importance(target, "obj1"))
    learned = sigma_analysis(
        target, partition(target.space, learned_mask), "obj1",
        group_size=10, trials=10_000, rng=np.random.default_rng(5),
    )
    true = sigma_analysis(
        target, partition(target.space, true_mask), "obj1",
        group_size=10, trials=10_000, rng=np.random.default_rng(6),
    )
    in_ok = learned.sigma_in_cluster <= 0.6 * learned.sigma_random
    cross_ok = (
        abs(learned.sigma_cross_cluster - learned.sigma_random)
        <= 0.15 * learned.sigma_random
    )
    close_ok = (
        abs(learned.sigma_in_cluster - true.sigma_in_cluster)
        <= 0.25 * true.sigma_in_cluster
    )
    report(
        3,
        in_ok and cross_ok and close_ok,
        f"random={learned.sigma_random:.3f} in={learned.sigma_in_cluster:.3f} "
        f"cross={learned.sigma_cross_cluster:.3f} true_in={true.sigma_in_cluster:.3f}",
    )


def test_criterion_4_single_objective_end_to_end():
    means = mean_metric(BENCH_SPEC, ("random", "baseline_rf", "fist"), "best_rank")
    f, r, b = means["fist"], means["random"], means["baseline_rf"]
    ok = f <= 0.6 * r and f <= 0.9 * b
    report(
        4,
        ok,
        f"mean best-rank fist={f:.2f} random={r:.2f} baseline_rf={b:.2f} "
        f"(fist/random={f / r:.2f} <= 0.6, fist/rf={f / b:.2f} <= 0.9)",
    )


def test_criterion_5_multi_objective_adrs():
    spec = SyntheticSpec(
        counts=BENCH_SPEC.counts,
        gamma=BENCH_SPEC.gamma,
        beta=BENCH_SPEC.beta,
        eps=BENCH_SPEC.eps,
        objectives=2,
        seed=BENCH_SPEC.seed,
    )
    means = mean_metric(spec, ("random", "fist"), "adrs")
    f, r = means["fist"], means["random"]
    ok = f <= 0.8 * r
    report(5, ok, f"mean ADRS fist={f:.4f} random={r:.4f} (ratio={f / r:.2f} <= 0.8)")


def test_criterion_6_learner_oracle_equivalence():
    rng = np.random.default_rng(60)
    blocks = (2, 3, 2)
    failures = 0
    for _ in range(500):
        n = int(rng.integers(3, 28))
        cols = sum(blocks)
        X = np.zeros((n, cols))
        offset = 0
        for bsize in blocks:
            X[np.arange(n), offset + rng.integers(0, bsize, size=n)] = 1.0
            offset += bsize
        y = rng.standard_normal(n)
        model = fit_gbrt(X, y, rounds=1, learning_rate=1.0, max_depth=1, lam=0.0)
        # brute-force best-SSE stump on the residuals
        r = y - y.mean()
        best = None
        best_sse = float(np.sum(r**2))
        for col in range(cols):
            right = X[:, col] > 0.5
            nr = int(right.sum())
            if nr == 0 or nr == n:
                continue
            sse = float(
                np.sum((r[~right] - r[~right].mean()) ** 2)
                + np.sum((r[right] - r[right].mean()) ** 2)
            )
            if sse < best_sse:
                best_sse = sse
                best = col
        tree = model.trees[0]
        preds = model.predict(X)
        if best is None:
            if tree.n_nodes != 1 or not np.allclose(preds, y.mean(), atol=1e-12):
                failures += 1
        else:
            right = X[:, best] > 0.5
            want = np.where(right, y.mean() + r[right].mean(), y.mean() + r[~right].mean())
            if tree.feature[0] != best or not np.allclose(
                preds, want, rtol=1e-12, atol=1e-12
            ):
                failures += 1

    # full-depth single tree interpolates distinct rows
    mse_fail = 0
    for _ in range(20):
        rows = np.unique(
            np.stack(
                [
                    np.concatenate(
                        [np.eye(b)[rng.integers(0, b)] for b in blocks]
                    )
                    for _ in range(30)
                ]
            ),
            axis=0,
        )
        y = rng.standard_normal(len(rows))
        m = fit_gbrt(rows, y, rounds=1, learning_rate=1.0, max_depth=sum(blocks), lam=0.0)
        if float(np.mean((m.predict(rows) - y) ** 2)) > 1e-20:
            mse_fail += 1
    ok = failures == 0 and mse_fail == 0
    report(6, ok, f"stump mismatches={failures}/500, interpolation failures={mse_fail}/20")


def test_criterion_7_metric_oracles():
    rng = np.random.default_rng(70)
    pareto_bad = 0
    adrs_bad = 0
    union_bad = 0
    for _ in range(200):
        pts = rng.uniform(0.5, 3.0, size=(int(rng.integers(2, 40)), 2))
        senses = ("min", "min")
        front = {tuple(p) for p in pareto_front(pts, senses)}
        oracle = set()
        for i in range(len(pts)):
            dominated = False
            for j in range(len(pts)):
                if i != j and np.all(pts[j] <= pts[i]) and np.any(pts[j] < pts[i]):
                    dominated = True
                    break
            if not dominated:
                oracle.add(tuple(pts[i]))
        if front != oracle:
            pareto_bad += 1

        T = rng.uniform(0.5, 3.0, size=(int(rng.integers(1, 6)), 2))
        L1 = rng.uniform(0.5, 3.0, size=(int(rng.integers(1, 6)), 2))
        L2 = rng.uniform(0.5, 3.0, size=(int(rng.integers(1, 6)), 2))
        direct = 0.0
        for t in T:
            best = np.inf
            for l in L1:
                d = max(0.0, max((l[j] - t[j]) / t[j] for j in range(2)))
                best = min(best, d)
            direct += best
        direct /= len(T)
        if abs(adrs(T, L1, senses) - direct) > 1e-12:
            adrs_bad += 1
        both = adrs(T, np.vstack([L1, L2]), senses)
        if both > min(adrs(T, L1, senses), adrs(T, L2, senses)) + 1e-15:
            union_bad += 1
    ok = pareto_bad == 0 and adrs_bad == 0 and union_bad == 0
    report(
        7,
        ok,
        f"pareto mismatches={pareto_bad}, adrs mismatches={adrs_bad}, "
        f"union violations={union_bad} (200 fronts, tol 1e-12)",
    )


def test_criterion_8_determinism(tmp_path):
    spec = SyntheticSpec(counts=(2, 2, 3, 3), gamma=0.5, beta=0.5, seed=3)
    truth = synth_space(spec)
    evaluator = EvaluatorBinding(objectives=truth.objective_names, table=truth)
    importance = feature_importance(synth_space(spec, seed=4), "obj1")
    strategies = (
        "random",
        "baseline_rf",
        "baseline_xgb",
        "fist",
        "fist_no_dyn",
        "fist_mless_only",
        "fist_rand_importance",
    )
    replay_bad = []
    for strategy in strategies:
        cfg = TuneConfig(
            strategy=strategy,
            budget=14,
            objectives=truth.objective_names,
            senses=truth.senses,
            initial=4,
            theta=4,
            seed=99,
        )
        needs = strategy in ("fist", "fist_no_dyn", "fist_mless_only")
        a = runlog_to_jsonl(run(truth.space, evaluator, cfg, importance if needs else None))
        b = runlog_to_jsonl(run(truth.space, evaluator, cfg, importance if needs else None))
        if a != b:
            replay_bad.append(strategy)

    def suite_bytes(jobs, tag):
        config = BenchConfig(
            spec=spec,
            strategies=("random", "fist_rand_importance"),
            budgets=(12,),
            trials=3,
            theta=3,
            jobs=jobs,
        )
        out = tmp_path / tag
        bench(config, out_dir=out, plots=False, write_logs=False)
        return (
            (out / "metrics.csv").read_bytes(),
            (out / "summary.csv").read_bytes(),
        )

    first = suite_bytes(1, "a")
    rerun_ok = suite_bytes(1, "b") == first
    parallel_ok = suite_bytes(2, "c") == first
    ok = not replay_bad and rerun_ok and parallel_ok
    report(
        8,
        ok,
        f"non-deterministic strategies={replay_bad or 'none'}, "
        f"suite CSV identical across reruns={rerun_ok} and jobs levels={parallel_ok}",
    )
