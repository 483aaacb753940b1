"""Synthetic benchmark spaces, the external-evaluator protocol, run-log
persistence, and the benchmark suite runner.

Synthetic objective for a sample s:

    y(s) = sum_q gamma^q * v_q[s_q]
         + beta * sum_{q<r} u_qr[s_q, s_r]
         + eps * eta(s)

with per-option value tables v_q drawn once from the seeded rng and
standardized to zero mean / unit population variance, pairwise interaction
tables u_qr drawn likewise but scaled by sqrt(gamma^q * gamma^r) (important
features dominate their interactions too, so the decay ordering survives
large beta), and eta a per-sample noise stream keyed by (seed, objective).
The geometric weights make the ground-truth importance ordering feature 1 >
2 > ... > c whenever beta and eps are small.  Each objective column is
shifted so its minimum is exactly 1, keeping relative-distance metrics well
defined.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import os
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .explore import (
    EvaluationError,
    LearnerParams,
    RunLog,
    RunRecord,
    TuneConfig,
    run,
)
from .importance import feature_importance
from .metrics import adrs, cost_to_rank, pareto_front, rank_of_best
from .space import Dataset, FeatureSpec, ParameterSpace, Sample

_MAX_EXHAUSTIVE = 10**6

_JSON_SEPARATORS = (",", ":")


class RunlogError(ValueError):
    """Malformed run-log file."""


# ---------------------------------------------------------------------------
# synthetic spaces


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a fully tabulated benchmark space."""

    counts: tuple[int, ...] = (2, 2, 2, 3, 3, 3, 2, 2, 2)
    gamma: float = 0.6
    beta: float = 0.0
    eps: float = 0.0
    objectives: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        if any(n < 2 for n in self.counts):
            raise ValueError("every feature needs at least 2 options")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.beta < 0.0 or self.eps < 0.0:
            raise ValueError("beta and eps must be >= 0")
        if self.objectives < 1:
            raise ValueError("need at least one objective")


def _standardized(values: np.ndarray) -> np.ndarray:
    v = values - values.mean()
    sd = float(np.sqrt(np.mean(v**2)))
    if sd == 0.0:  # measure-zero draw; fall back to a fixed ramp
        v = np.arange(len(values), dtype=float)
        v -= v.mean()
        sd = float(np.sqrt(np.mean(v**2)))
    return v / sd


def synth_space(spec: SyntheticSpec, seed: int | None = None) -> Dataset:
    """Materialize the complete truth table for a synthetic spec.

    ``seed`` overrides ``spec.seed``, which is how sibling designs of the same
    family (same decay, fresh value tables) are produced for importance
    transfer.
    """
    counts = spec.counts
    c = len(counts)
    total = 1
    for n in counts:
        total *= n
        if total > _MAX_EXHAUSTIVE:
            raise ValueError(
                f"space too large for exhaustive materialization (> {_MAX_EXHAUSTIVE})"
            )
    used_seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(used_seed)
    space = ParameterSpace(
        tuple(
            FeatureSpec(f"f{q + 1}", tuple(str(i) for i in range(n)))
            for q, n in enumerate(counts)
        )
    )
    digits = space.decode_flats(np.arange(total))
    matrix = np.empty((total, spec.objectives))
    for o in range(spec.objectives):
        y = np.zeros(total)
        for q, n in enumerate(counts):
            v = _standardized(rng.standard_normal(n))
            y += spec.gamma ** (q + 1) * v[digits[:, q]]
        if spec.beta > 0.0:
            for q in range(c):
                for r in range(q + 1, c):
                    u = _standardized(
                        rng.standard_normal((counts[q], counts[r])).ravel()
                    ).reshape(counts[q], counts[r])
                    scale = spec.gamma ** ((q + 1 + r + 1) / 2)
                    y += spec.beta * scale * u[digits[:, q], digits[:, r]]
        if spec.eps > 0.0:
            noise_rng = np.random.default_rng([used_seed, o, 0x6E6F6973])
            y += spec.eps * noise_rng.uniform(-1.0, 1.0, total)
        y -= y.min()
        y += 1.0
        matrix[:, o] = y
    rows = {
        tuple(d): tuple(float(v) for v in matrix[i])
        for i, d in enumerate(digits.tolist())
    }
    names = tuple(f"obj{o + 1}" for o in range(spec.objectives))
    return Dataset(
        space=space, objective_names=names, senses=("min",) * spec.objectives, rows=rows
    )


# ---------------------------------------------------------------------------
# evaluators


def _env_name(feature_name: str) -> str:
    return "FIST_PARAM_" + re.sub(r"[^A-Za-z0-9]", "_", feature_name).upper()


@dataclass
class EvaluatorBinding:
    """Resolves samples to objective vectors, from a truth table or by
    launching an external command.

    Command mode passes one environment variable per feature,
    ``FIST_PARAM_<NAME>=<option label>``, and expects every configured
    objective on stdout as a ``<objective>=<decimal>`` line.
    """

    objectives: tuple[str, ...]
    table: Dataset | None = None
    command: str | None = None
    timeout: float = 300.0
    retries: int = 0

    def __post_init__(self) -> None:
        self.objectives = tuple(self.objectives)
        if (self.table is None) == (self.command is None):
            raise ValueError("configure exactly one of table or command")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.table is not None:
            self._order = tuple(
                self.table.objective_index(n) for n in self.objectives
            )

    def __call__(self, space: ParameterSpace, sample: Sample) -> tuple[float, ...]:
        return external_evaluate(self, space, sample)


def external_evaluate(
    binding: EvaluatorBinding, space: ParameterSpace, sample: Sample
) -> tuple[float, ...]:
    """Label one sample through the binding; raises EvaluationError on failure."""
    if binding.table is not None:
        row = binding.table.rows.get(tuple(sample))
        if row is None:
            raise EvaluationError(
                f"sample {space.labels_of(sample)} not present in the table"
            )
        return tuple(row[i] for i in binding._order)

    env = dict(os.environ)
    for name, label in zip(space.names, space.labels_of(sample)):
        env[_env_name(name)] = label
    last_error = "no attempt made"
    for _ in range(binding.retries + 1):
        try:
            proc = subprocess.run(
                binding.command,
                shell=True,
                env=env,
                capture_output=True,
                text=True,
                timeout=binding.timeout,
            )
        except subprocess.TimeoutExpired:
            last_error = f"timed out after {binding.timeout}s"
            continue
        if proc.returncode != 0:
            last_error = f"exit code {proc.returncode}: {proc.stderr.strip()[:200]}"
            continue
        found: dict[str, float] = {}
        for line in proc.stdout.splitlines():
            key, sep, raw = line.partition("=")
            key = key.strip()
            if sep and key in binding.objectives:
                try:
                    found[key] = float(raw.strip())
                except ValueError:
                    pass
        missing = [n for n in binding.objectives if n not in found]
        if missing:
            last_error = f"objective lines missing from stdout: {missing}"
            continue
        return tuple(found[n] for n in binding.objectives)
    raise EvaluationError(last_error)


# ---------------------------------------------------------------------------
# run-log persistence


def runlog_to_jsonl(log: RunLog) -> str:
    lines = [
        json.dumps({"config": log.config, "seed": log.seed}, separators=_JSON_SEPARATORS)
    ]
    for r in log.records:
        lines.append(
            json.dumps(
                {
                    "iter": r.iteration,
                    "phase": r.phase,
                    "sample": list(r.sample),
                    "objectives": r.objectives,
                    "feasible": r.feasible,
                },
                separators=_JSON_SEPARATORS,
            )
        )
    return "\n".join(lines) + "\n"


def runlog_from_jsonl(text: str) -> RunLog:
    lines = text.splitlines()
    if not lines:
        raise RunlogError("line 1: empty run log")
    try:
        header = json.loads(lines[0])
        config = header["config"]
        seed = int(header["seed"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise RunlogError(f"line 1: bad header ({e})") from None
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise RunlogError(f"line {i}: blank line inside run log")
        try:
            d = json.loads(line)
            records.append(
                RunRecord(
                    iteration=int(d["iter"]),
                    phase=str(d["phase"]),
                    sample=tuple(int(v) for v in d["sample"]),
                    objectives={str(k): float(v) for k, v in d["objectives"].items()},
                    feasible=bool(d["feasible"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise RunlogError(f"line {i}: bad record ({e})") from None
    return RunLog(config=config, seed=seed, records=records)


def write_runlog(log: RunLog, path) -> None:
    Path(path).write_text(runlog_to_jsonl(log), encoding="utf-8")


def read_runlog(path) -> RunLog:
    return runlog_from_jsonl(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# benchmark suite


@dataclass(frozen=True)
class BenchConfig:
    """Grid of (strategy, budget, trial seed) cells over one synthetic space."""

    spec: SyntheticSpec = SyntheticSpec()
    strategies: tuple[str, ...] = ("random", "baseline_rf", "fist")
    budgets: tuple[int, ...] = (60,)
    trials: int = 100
    seed_base: int = 0
    theta: int = 10
    batch: int = 1
    depth_init: int = 3
    depth_final: int = 10
    target_rank: int | None = None
    learner: LearnerParams = LearnerParams()
    jobs: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


_dataset_cache: dict[tuple[SyntheticSpec, int | None], Dataset] = {}
_importance_cache: dict[tuple[SyntheticSpec, int], np.ndarray] = {}


def _cached_dataset(spec: SyntheticSpec, seed: int | None) -> Dataset:
    key = (spec, seed)
    if key not in _dataset_cache:
        _dataset_cache[key] = synth_space(spec, seed)
    return _dataset_cache[key]


def prior_importance(spec: SyntheticSpec) -> np.ndarray:
    """Importance learned from a sibling design: same family, fresh tables."""
    key = (spec, spec.seed + 1)
    if key not in _importance_cache:
        prior = _cached_dataset(spec, spec.seed + 1)
        _importance_cache[key] = feature_importance(prior, prior.objective_names[0])
    return _importance_cache[key]


def _bench_cell(args) -> tuple[dict, RunLog] | None:
    cfg, strategy, budget, seed = args
    try:
        truth = _cached_dataset(cfg.spec, None)
        tune_cfg = TuneConfig(
            strategy=strategy,
            budget=budget,
            objectives=truth.objective_names,
            senses=truth.senses,
            theta=cfg.theta,
            batch=cfg.batch,
            depth_init=cfg.depth_init,
            depth_final=cfg.depth_final,
            seed=seed,
            learner=cfg.learner,
        )
        importance = None
        if strategy in ("fist", "fist_no_dyn", "fist_mless_only"):
            importance = prior_importance(cfg.spec)
        evaluator = EvaluatorBinding(objectives=truth.objective_names, table=truth)
        log = run(truth.space, evaluator, tune_cfg, importance=importance)
        row: dict = {"strategy": strategy, "budget": budget, "seed": seed}
        if truth.num_objectives == 1:
            obj = truth.objective_names[0]
            row["best_rank"] = rank_of_best(log, truth, obj)
            if cfg.target_rank is not None:
                row[f"cost_to_rank@{cfg.target_rank}"] = cost_to_rank(
                    log, truth, obj, cfg.target_rank
                )
        else:
            truth_front = pareto_front(truth.values_matrix(), truth.senses)
            pts = [
                [rec.objectives[n] for n in truth.objective_names]
                for rec in log.records
                if rec.feasible
            ]
            approx = pareto_front(np.asarray(pts), truth.senses)
            row["adrs"] = adrs(truth_front, approx, truth.senses)
        return row, log
    except Exception as e:  # cell failures abort that cell only
        import logging

        logging.getLogger(__name__).error(
            "bench cell (%s, b=%s, seed=%s) failed: %s", strategy, budget, seed, e
        )
        return None


def bench(
    config: BenchConfig,
    out_dir=None,
    plots: bool = True,
    write_logs: bool = True,
) -> tuple[list[dict], list[dict]]:
    """Run every (strategy, budget, seed) cell; returns (rows, summary).

    When ``out_dir`` is given, writes metrics.csv, summary.csv, per-cell run
    logs, and (unless disabled) the comparison figures.  Output bytes are a
    pure function of the config: rows are sorted before writing, so the jobs
    count never changes them.
    """
    cells = [
        (config, s, b, config.seed_base + t)
        for s in config.strategies
        for b in config.budgets
        for t in range(config.trials)
    ]
    # warm the shared caches before forking workers
    _cached_dataset(config.spec, None)
    if any(s in ("fist", "fist_no_dyn", "fist_mless_only") for s in config.strategies):
        prior_importance(config.spec)
    if config.jobs > 1:
        with multiprocessing.Pool(config.jobs) as pool:
            outcomes = pool.map(_bench_cell, cells)
    else:
        outcomes = [_bench_cell(c) for c in cells]

    rows = [out[0] for out in outcomes if out is not None]
    rows.sort(key=lambda r: (r["strategy"], r["budget"], r["seed"]))
    summary = _summarize_rows(rows)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "metrics.csv", rows)
        _write_csv(out / "summary.csv", summary)
        if write_logs:
            logdir = out / "runlogs"
            logdir.mkdir(exist_ok=True)
            for outcome in outcomes:
                if outcome is None:
                    continue
                row, log = outcome
                name = f"{row['strategy']}_b{row['budget']}_s{row['seed']}.jsonl"
                write_runlog(log, logdir / name)
        if plots:
            from . import plots as _plots

            metric = "adrs" if config.spec.objectives > 1 else "best_rank"
            _plots.render_metric_curves(
                summary, metric, out / f"{metric}_vs_budget.png"
            )
    return rows, summary


def _summarize_rows(rows: list[dict]) -> list[dict]:
    metrics = [
        k for k in (rows[0] if rows else {}) if k not in ("strategy", "budget", "seed")
    ]
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["strategy"], r["budget"]), []).append(r)
    summary = []
    for (strategy, budget), members in sorted(groups.items()):
        for m in metrics:
            vals = [r[m] for r in members if r.get(m) is not None]
            arr = np.asarray(vals, dtype=float)
            summary.append(
                {
                    "strategy": strategy,
                    "budget": budget,
                    "metric": m,
                    "mean": float(arr.mean()) if vals else float("nan"),
                    "std": float(arr.std()) if vals else float("nan"),
                    "count": len(vals),
                }
            )
    return summary


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0].keys()))
        for r in rows:
            w.writerow([_format_cell(v) for v in r.values()])
    path.write_text(buf.getvalue(), encoding="utf-8")
