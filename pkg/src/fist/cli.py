"""Command-line interface.

Subcommands: ``synth`` (emit a synthetic space + truth table), ``importance``,
``sigma``, ``tune``, ``metrics``, and ``bench``.  Exit codes: 0 on success,
2 on configuration errors, 3 when an evaluator failure exhausted its retries.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .cluster import partition, sigma_analysis
from .explore import ConfigError, LearnerParams, TuneConfig, run
from .harness import (
    BenchConfig,
    EvaluatorBinding,
    RunlogError,
    SyntheticSpec,
    bench,
    read_runlog,
    synth_space,
    write_runlog,
)
from .importance import (
    MaskError,
    aggregate_importance,
    feature_importance,
    importance_mask,
    importance_rank,
)
from .metrics import adrs, cost_to_rank, pareto_front, rank_of_best
from .space import Dataset, SpaceError, TableError, parse_space, space_to_json


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_space(path: str):
    return parse_space(_read(path))


def _parse_counts(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad counts list {text!r}; expected e.g. 2,2,3") from None


def _parse_objective_args(pairs: list[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    names, senses = [], []
    for p in pairs:
        name, _, sense = p.partition(":")
        sense = sense or "min"
        if sense not in ("min", "max"):
            raise ConfigError(f"objective {p!r}: sense must be min or max")
        names.append(name)
        senses.append(sense)
    return tuple(names), tuple(senses)


def _write_text(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else str(v) for v in r])
    return buf.getvalue()


def _load_importance_csv(path: str, space) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(_read(path))))
    if not rows or rows[0][:2] != ["feature", "importance"]:
        raise ConfigError(f"{path}: expected an importance CSV (feature,importance,...)")
    values = {r[0]: float(r[1]) for r in rows[1:] if r}
    missing = [n for n in space.names if n not in values]
    if missing:
        raise ConfigError(f"{path}: missing importance for features {missing}")
    return np.asarray([values[n] for n in space.names])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        counts=_parse_counts(args.counts),
        gamma=args.gamma,
        beta=args.beta,
        eps=args.eps,
        objectives=args.objectives,
        seed=args.seed,
    )
    data = synth_space(spec)
    _write_text(args.out_space, space_to_json(data.space))
    _write_text(args.out_table, data.to_csv())
    print(f"wrote {args.out_space} and {args.out_table} ({data.space.size} rows)")
    return 0


def _cmd_importance(args) -> int:
    space = _load_space(args.space)
    datasets = [Dataset.from_csv(_read(p), space) for p in args.data]
    objectives = args.objective or list(datasets[0].objective_names)
    out_path = Path(args.out)
    for obj in objectives:
        vectors = [feature_importance(d, obj) for d in datasets]
        agg = aggregate_importance(vectors) if len(vectors) > 1 else vectors[0]
        # rank 1 = most important
        order = importance_rank(agg)
        ranks = {feat_1based: len(order) - pos for pos, feat_1based in enumerate(order)}
        rows = [
            [space.names[q], float(agg[q]), ranks[q + 1]]
            for q in range(space.num_features)
        ]
        path = (
            out_path
            if len(objectives) == 1
            else out_path.with_name(f"{out_path.stem}.{obj}{out_path.suffix}")
        )
        _write_text(path, _rows_to_csv(["feature", "importance", "rank"], rows))
        print(f"wrote {path}")
    return 0


def _cmd_sigma(args) -> int:
    space = _load_space(args.space)
    data = Dataset.from_csv(_read(args.data), space)
    objectives = [args.objective] if args.objective else list(data.objective_names)
    rng = np.random.default_rng(args.seed)
    rows = []
    for obj in objectives:
        if args.true_importance:
            values = feature_importance(data, obj)
        else:
            values = _load_importance_csv(args.importance, space)
        if args.top_k:
            mask = importance_mask(values, "top_k", k=args.top_k)
        else:
            mask = importance_mask(values, "median")
        part = partition(space, mask)
        res = sigma_analysis(
            data, part, obj, group_size=args.group_size, trials=args.trials, rng=rng
        )
        rows.append(
            [obj, res.sigma_random, res.sigma_in_cluster, res.sigma_cross_cluster]
        )
    text = _rows_to_csv(
        ["objective", "sigma_random", "sigma_in_cluster", "sigma_cross_cluster"], rows
    )
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    if args.plot:
        from . import plots

        plots.render_sigma_bars(
            [
                {
                    "objective": r[0],
                    "sigma_random": r[1],
                    "sigma_in_cluster": r[2],
                    "sigma_cross_cluster": r[3],
                }
                for r in rows
            ],
            args.plot,
        )
        print(f"wrote {args.plot}")
    return 0


def _cmd_tune(args) -> int:
    space = _load_space(args.space)
    names, senses = _parse_objective_args(args.objective)
    learner = LearnerParams(
        rounds=args.rounds,
        learning_rate=args.learning_rate,
        lam=args.lam,
        min_leaf=args.min_leaf,
        rf_trees=args.rf_trees,
        rf_feature_frac=args.rf_feature_frac,
    )
    config = TuneConfig(
        strategy=args.strategy,
        budget=args.budget,
        objectives=names,
        senses=senses,
        initial=args.initial,
        theta=args.theta,
        depth_init=args.depth_init,
        depth_final=args.depth_final,
        batch=args.batch,
        seed=args.seed,
        learner=learner,
    )
    if args.table:
        table = Dataset.from_csv(_read(args.table), space, senses=None)
        missing = [n for n in names if n not in table.objective_names]
        if missing:
            raise ConfigError(f"table lacks objectives {missing}")
        evaluator = EvaluatorBinding(objectives=names, table=table)
    else:
        evaluator = EvaluatorBinding(
            objectives=names,
            command=args.evaluator,
            timeout=args.timeout,
            retries=args.retries,
        )
    importance = None
    if args.importance:
        importance = _load_importance_csv(args.importance, space)
    elif args.prior_data:
        priors = []
        for p in args.prior_data:
            prior = Dataset.from_csv(_read(p), space)
            obj = names[0] if names[0] in prior.objective_names else prior.objective_names[0]
            priors.append(feature_importance(prior, obj))
        importance = aggregate_importance(priors)
    log = run(space, evaluator, config, importance=importance)
    write_runlog(log, args.out)
    infeasible = sum(1 for r in log.records if not r.feasible)
    print(f"wrote {args.out} ({len(log.records)} records, {infeasible} infeasible)")
    return 3 if infeasible else 0


def _cmd_metrics(args) -> int:
    space = _load_space(args.space)
    logs = [read_runlog(p) for p in args.runlog]
    shapes = {repr(log.config.get("objectives")) for log in logs}
    if len(shapes) != 1:
        raise ConfigError("run logs have mixed objective configurations")
    log_objectives = logs[0].config["objectives"]
    sense_of = {o["name"]: o["sense"] for o in log_objectives}
    raw = Dataset.from_csv(_read(args.truth), space)
    truth = Dataset(
        space=space,
        objective_names=raw.objective_names,
        senses=tuple(sense_of.get(n, "min") for n in raw.objective_names),
        rows=raw.rows,
    )
    names = [o["name"] for o in log_objectives]
    missing = [n for n in names if n not in truth.objective_names]
    if missing:
        raise ConfigError(f"truth table lacks objectives {missing}")
    multi = len(names) > 1
    header = ["strategy", "budget", "seed"]
    if multi:
        header.append("adrs")
    else:
        header.append("best_rank")
        if args.target_rank is not None:
            header.append(f"cost_to_rank@{args.target_rank}")
    rows = []
    for log in logs:
        row = [
            log.config.get("strategy"),
            log.config.get("budget"),
            log.seed,
        ]
        if multi:
            cols = [truth.objective_index(n) for n in names]
            tf = pareto_front(truth.values_matrix()[:, cols], [sense_of[n] for n in names])
            pts = [
                [rec.objectives[n] for n in names]
                for rec in log.records
                if rec.feasible
            ]
            af = pareto_front(np.asarray(pts), [sense_of[n] for n in names])
            row.append(adrs(tf, af, [sense_of[n] for n in names]))
        else:
            row.append(rank_of_best(log, truth, names[0]))
            if args.target_rank is not None:
                row.append(cost_to_rank(log, truth, names[0], args.target_rank))
        rows.append(row)
    text = _rows_to_csv(header, rows)
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_bench(args) -> int:
    spec = SyntheticSpec(
        counts=_parse_counts(args.counts),
        gamma=args.gamma,
        beta=args.beta,
        eps=args.eps,
        objectives=args.objectives,
        seed=args.seed,
    )
    learner = LearnerParams(
        rounds=args.rounds,
        learning_rate=args.learning_rate,
        lam=args.lam,
        min_leaf=args.min_leaf,
        rf_trees=args.rf_trees,
        rf_feature_frac=args.rf_feature_frac,
    )
    config = BenchConfig(
        spec=spec,
        strategies=tuple(args.strategies.split(",")),
        budgets=tuple(int(b) for b in args.budgets.split(",")),
        trials=args.trials,
        seed_base=args.seed_base,
        theta=args.theta,
        batch=args.batch,
        depth_init=args.depth_init,
        depth_final=args.depth_final,
        target_rank=args.target_rank,
        learner=learner,
        jobs=args.jobs,
    )
    rows, summary = bench(
        config, out_dir=args.out_dir, plots=not args.no_plots, write_logs=not args.no_logs
    )
    print(f"wrote {args.out_dir}/metrics.csv ({len(rows)} cells)")
    for s in summary:
        print(
            f"  {s['strategy']:<22} b={s['budget']:<4} {s['metric']}: "
            f"mean={s['mean']:.4g} std={s['std']:.4g} n={s['count']}"
        )
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_learner_flags(p: argparse.ArgumentParser) -> None:
    d = LearnerParams()
    p.add_argument("--rounds", type=int, default=d.rounds, help="boosting rounds")
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--lam", type=float, default=d.lam, help="L2 leaf regularization")
    p.add_argument("--min-leaf", type=int, default=d.min_leaf)
    p.add_argument("--rf-trees", type=int, default=d.rf_trees)
    p.add_argument("--rf-feature-frac", type=float, default=d.rf_feature_frac)


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    d = SyntheticSpec()
    p.add_argument("--counts", default=",".join(str(n) for n in d.counts))
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--eps", type=float, default=d.eps)
    p.add_argument("--objectives", type=int, default=d.objectives)
    p.add_argument("--seed", type=int, default=d.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fist",
        description="Feature-importance sampling and tree-based parameter tuning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic space + truth table")
    _add_synth_flags(p)
    p.add_argument("--out-space", required=True)
    p.add_argument("--out-table", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("importance", help="feature importance from labeled tables")
    p.add_argument("--space", required=True)
    p.add_argument("--data", action="append", required=True, help="dataset CSV (repeatable)")
    p.add_argument("--objective", action="append", help="objective name (default: all)")
    p.add_argument("--out", required=True, help="importance CSV path")
    p.set_defaults(func=_cmd_importance)

    p = sub.add_parser("sigma", help="sampling-similarity study")
    p.add_argument("--space", required=True)
    p.add_argument("--data", required=True, help="complete dataset CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--importance", help="importance CSV")
    src.add_argument(
        "--true-importance",
        action="store_true",
        help="compute importance from the dataset itself",
    )
    p.add_argument("--objective", help="restrict to one objective")
    p.add_argument("--top-k", type=int, help="mask rule top_k(k) instead of median")
    p.add_argument("--group-size", type=int, default=10)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--plot", help="also render a bar figure to this path")
    p.set_defaults(func=_cmd_sigma)

    p = sub.add_parser("tune", help="run one tuning strategy")
    p.add_argument("--space", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--initial", type=int, help="model-less samples (default (b-10)//2)")
    p.add_argument("--theta", type=int, default=10)
    p.add_argument("--depth-init", type=int, default=3)
    p.add_argument("--depth-final", type=int, default=10)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--objective",
        action="append",
        required=True,
        metavar="NAME[:min|max]",
        help="objective (repeatable)",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", help="truth table CSV evaluator")
    src.add_argument("--evaluator", help="shell command evaluator")
    imp = p.add_mutually_exclusive_group()
    imp.add_argument("--importance", help="importance CSV")
    imp.add_argument(
        "--prior-data", action="append", help="prior dataset CSV (repeatable)"
    )
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--retries", type=int, default=0)
    p.add_argument("--out", required=True, help="run log (JSONL)")
    _add_learner_flags(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("metrics", help="score run logs against a truth table")
    p.add_argument("--space", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--target-rank", type=int)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("runlog", nargs="+")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("bench", help="run a strategy-comparison suite")
    _add_synth_flags(p)
    p.add_argument("--strategies", default="random,baseline_rf,fist")
    p.add_argument("--budgets", default="60")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--theta", type=int, default=10)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--depth-init", type=int, default=3)
    p.add_argument("--depth-final", type=int, default=10)
    p.add_argument("--target-rank", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--no-logs", action="store_true")
    p.add_argument("--out-dir", required=True)
    _add_learner_flags(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        SpaceError,
        TableError,
        ConfigError,
        MaskError,
        RunlogError,
        ValueError,
        FileNotFoundError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
