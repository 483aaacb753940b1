"""Budgeted exploration strategies over tabulated or live-evaluated spaces.

Strategies:

* ``random``          - b distinct uniform samples, no model.
* ``baseline_rf``     - uniform model-less phase, then model-guided picks with
                        a random-forest surrogate at fixed depth.
* ``baseline_xgb``    - same refinement loop with the boosted-tree surrogate.
* ``fist``            - clustered model-less sampling, pseudo-labeled
                        exploration for the first theta iterations, then true
                        exploitation, with the depth ramp.
* ``fist_no_dyn``     - fist with the depth fixed at d_final.
* ``fist_mless_only`` - clustered model-less sampling, then plain exploitation.
* ``fist_rand_importance`` - fist with a random permutation as the importance.

One rng seeded from the config drives every stochastic choice, in a fixed
order, so a run is a pure function of (space, evaluator, config, importance).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cluster import ApproxLabelStore, Partition, partition
from .importance import MaskError, importance_mask
from .model import DepthSchedule, fit_forest, fit_gbrt
from .space import ParameterSpace, Sample

logger = logging.getLogger(__name__)

STRATEGIES = (
    "random",
    "baseline_rf",
    "baseline_xgb",
    "fist",
    "fist_no_dyn",
    "fist_mless_only",
    "fist_rand_importance",
)

_EXPLORING = ("fist", "fist_no_dyn", "fist_rand_importance")
_DYNAMIC = ("fist", "fist_rand_importance")

_PREDICT_CHUNK = 65536


class ConfigError(ValueError):
    """Invalid tuning configuration."""


class EvaluationError(RuntimeError):
    """Raised by evaluators when a sample cannot be labeled."""


@dataclass(frozen=True)
class LearnerParams:
    """Surrogate hyperparameters shared by all strategies."""

    rounds: int = 50
    learning_rate: float = 0.1
    lam: float = 1.0
    min_leaf: int = 1
    rf_trees: int = 20
    rf_feature_frac: float = 1 / 3

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.lam < 0.0:
            raise ConfigError("lam must be >= 0")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.rf_trees < 1:
            raise ConfigError("rf_trees must be >= 1")
        if not 0.0 < self.rf_feature_frac <= 1.0:
            raise ConfigError("rf_feature_frac must be in (0, 1]")

    def as_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "learning_rate": self.learning_rate,
            "lam": self.lam,
            "min_leaf": self.min_leaf,
            "rf_trees": self.rf_trees,
            "rf_feature_frac": self.rf_feature_frac,
        }


@dataclass(frozen=True)
class TuneConfig:
    """One tuning run: strategy, budget split, depth ramp, and objectives."""

    strategy: str
    budget: int
    objectives: tuple[str, ...]
    senses: tuple[str, ...] = ()
    initial: int | None = None  # default: (budget - 10) // 2
    theta: int = 10
    depth_init: int = 3
    depth_final: int = 10
    batch: int = 1
    seed: int = 0
    learner: LearnerParams = LearnerParams()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "senses", tuple(self.senses))

    @property
    def p(self) -> int:
        return (self.budget - 10) // 2 if self.initial is None else self.initial

    @property
    def resolved_senses(self) -> tuple[str, ...]:
        return self.senses if self.senses else ("min",) * len(self.objectives)

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not self.objectives:
            raise ConfigError("need at least one objective")
        senses = self.resolved_senses
        if len(senses) != len(self.objectives):
            raise ConfigError("senses and objectives differ in length")
        for s in senses:
            if s not in ("min", "max"):
                raise ConfigError(f"sense must be 'min' or 'max', got {s!r}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.p < 1:
            raise ConfigError(
                "initial sample count resolves to "
                f"{self.p}; pass --initial explicitly for small budgets"
            )
        if self.p >= self.budget:
            raise ConfigError("initial sample count must be smaller than the budget")
        if not 0 <= self.theta <= self.budget - self.p:
            raise ConfigError("theta must satisfy 0 <= theta <= budget - initial")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if not 1 <= self.depth_init <= self.depth_final:
            raise ConfigError("need 1 <= depth_init <= depth_final")
        self.learner.validate()

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "budget": self.budget,
            "initial": self.p,
            "theta": self.theta,
            "depth_init": self.depth_init,
            "depth_final": self.depth_final,
            "batch": self.batch,
            "seed": self.seed,
            "objectives": [
                {"name": n, "sense": s}
                for n, s in zip(self.objectives, self.resolved_senses)
            ],
            "learner": self.learner.as_dict(),
        }


@dataclass
class RunRecord:
    iteration: int
    phase: str  # model_less | explore | exploit
    sample: Sample
    objectives: dict[str, float]  # empty when infeasible
    feasible: bool
    elapsed: float = field(default=0.0, compare=False)


@dataclass
class RunLog:
    config: dict
    seed: int
    records: list[RunRecord]


# ---------------------------------------------------------------------------
# acquisition


def draw_weights(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform point on the k-simplex for Chebyshev scalarization."""
    return rng.dirichlet(np.ones(k))


def acquisition_scores(
    predictions: np.ndarray, senses: Sequence[str], weights: np.ndarray | None = None
) -> np.ndarray:
    """Scores for a candidate pool; lower is better.

    Single objective: the predicted value with the sense applied.  Multiple
    objectives: random-weight Chebyshev scalarization over predictions
    min-max normalized across the pool.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.ndim == 1:
        preds = preds.reshape(-1, 1)
    if preds.shape[0] == 0:
        raise ValueError("empty candidate pool")
    signs = np.asarray([1.0 if s == "min" else -1.0 for s in senses])
    if preds.shape[1] != signs.size:
        raise ValueError("predictions and senses have mismatched dimensions")
    m = preds * signs
    if m.shape[1] == 1:
        return m[:, 0]
    if weights is None:
        raise ValueError("multi-objective acquisition needs a weight vector")
    lo = m.min(axis=0)
    span = m.max(axis=0) - lo
    span[span == 0.0] = 1.0
    norm = (m - lo) / span
    return (norm * np.asarray(weights)).max(axis=1)


def _predictions(models, space: ParameterSpace, flats: np.ndarray) -> np.ndarray:
    out = np.empty((len(flats), len(models)))
    for start in range(0, len(flats), _PREDICT_CHUNK):
        chunk = flats[start : start + _PREDICT_CHUNK]
        X = space.encode_flats(chunk)
        for j, model in enumerate(models):
            out[start : start + len(chunk), j] = model.predict(X)
    return out


def _top_k(flats: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    order = np.argsort(scores, kind="stable")  # stable: lexicographic tie-break
    return flats[order[:k]]


# ---------------------------------------------------------------------------
# spec'd step operations


def model_less_sample(
    part: Partition, p: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Pick p distinct clusters uniformly and one uniform member from each.

    Returns (cluster ids, representative flat indices).
    """
    if p > part.num_clusters:
        raise ConfigError(
            f"initial sample count {p} exceeds the {part.num_clusters} clusters; "
            "mask more important features to build more clusters"
        )
    cids = rng.choice(part.num_clusters, size=p, replace=False)
    members = rng.integers(0, part.cluster_size, size=p)
    return cids, part.flats_for(cids, members)


def refine_step_explore(
    part: Partition,
    store: ApproxLabelStore,
    evaluated: np.ndarray,
    models,
    senses: Sequence[str],
    k: int,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Choose up to k samples from unexplored clusters, at most one per
    cluster, best acquisition first."""
    unexplored = np.setdiff1d(
        np.arange(part.num_clusters, dtype=np.int64), store.cluster_ids
    )
    if unexplored.size == 0:
        return np.empty(0, dtype=np.int64)
    cand = part.members_of_many(unexplored)
    cand = cand[~np.isin(cand, evaluated)]
    if cand.size == 0:
        return np.empty(0, dtype=np.int64)
    scores = acquisition_scores(
        _predictions(models, part.space, cand), senses, weights
    )
    order = np.argsort(scores, kind="stable")
    cand_cids = part.cluster_ids_of_flats(cand)
    chosen: list[int] = []
    taken: set[int] = set()
    for i in order:
        cid = int(cand_cids[i])
        if cid in taken:
            continue
        taken.add(cid)
        chosen.append(int(cand[i]))
        if len(chosen) == k:
            break
    return np.asarray(chosen, dtype=np.int64)


def refine_step_exploit(
    space: ParameterSpace,
    evaluated: np.ndarray,
    models,
    senses: Sequence[str],
    k: int,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Choose the top-k unevaluated samples by acquisition, clusters ignored."""
    cand = np.setdiff1d(np.arange(space.size, dtype=np.int64), evaluated)
    if cand.size == 0:
        return np.empty(0, dtype=np.int64)
    scores = acquisition_scores(_predictions(models, space, cand), senses, weights)
    return _top_k(cand, scores, k)


# ---------------------------------------------------------------------------
# run loop

Evaluator = Callable[[ParameterSpace, Sample], Sequence[float]]


class _RunState:
    def __init__(self, space, evaluator, config, log, t0):
        self.space = space
        self.evaluator = evaluator
        self.config = config
        self.log = log
        self.t0 = t0
        self.results: dict[int, tuple[float, ...] | None] = {}

    @property
    def remaining(self) -> int:
        return self.config.budget - len(self.log.records)

    def evaluated_flats(self) -> np.ndarray:
        return np.asarray(sorted(self.results), dtype=np.int64)

    def feasible_training(self) -> tuple[np.ndarray, np.ndarray]:
        flats = [f for f, v in self.results.items() if v is not None]
        labels = [self.results[f] for f in flats]
        if not flats:
            return np.empty(0, dtype=np.int64), np.empty((0, 0))
        return np.asarray(flats, dtype=np.int64), np.asarray(labels, dtype=float)

    def evaluate_batch(self, flats, iteration: int, phase: str):
        """Evaluate flats in lexicographic order, log, and collect labels."""
        out = []
        names = self.config.objectives
        for flat in np.sort(np.asarray(flats, dtype=np.int64))[: self.remaining]:
            flat = int(flat)
            if flat in self.results:
                raise RuntimeError(f"sample {flat} evaluated twice")
            sample = self.space.sample_at(flat)
            values: tuple[float, ...] | None
            try:
                raw = self.evaluator(self.space, sample)
                values = tuple(float(v) for v in raw)
                if len(values) != len(names):
                    raise EvaluationError(
                        f"evaluator returned {len(values)} values, "
                        f"expected {len(names)}"
                    )
            except EvaluationError as e:
                logger.warning("evaluation failed for %s: %s", sample, e)
                values = None
            self.results[flat] = values
            self.log.records.append(
                RunRecord(
                    iteration=iteration,
                    phase=phase,
                    sample=sample,
                    objectives={} if values is None else dict(zip(names, values)),
                    feasible=values is not None,
                    elapsed=time.perf_counter() - self.t0,
                )
            )
            out.append((flat, values))
        return out


def _masked_count(space: ParameterSpace, mask: np.ndarray) -> int:
    counts = np.asarray(space.counts, dtype=np.int64)
    return int(counts[mask].prod())


def _choose_mask(values: np.ndarray, p: int, space: ParameterSpace) -> np.ndarray:
    """Median-rule mask, widened to more important features until the cluster
    count covers the model-less sample count p."""
    mask = None
    try:
        mask = importance_mask(values, "median")
    except MaskError:
        pass
    if mask is not None and _masked_count(space, mask) >= p:
        return mask
    start = 1 if mask is None else int(mask.sum()) + 1
    for k in range(start, space.num_features):
        mask = importance_mask(values, "top_k", k=k)
        if _masked_count(space, mask) >= p:
            return mask
    raise ConfigError(
        f"initial sample count {p} exceeds the cluster count of every "
        "non-degenerate mask; lower the initial count"
    )


def _fit_models(state: _RunState, flats, labels, depth: int, rng) -> list:
    cfg = state.config
    X = state.space.encode_flats(flats)
    models = []
    for j in range(len(cfg.objectives)):
        y = labels[:, j]
        if cfg.strategy == "baseline_rf":
            models.append(
                fit_forest(
                    X,
                    y,
                    n_trees=cfg.learner.rf_trees,
                    max_depth=depth,
                    min_leaf=cfg.learner.min_leaf,
                    feature_frac=cfg.learner.rf_feature_frac,
                    rng=np.random.default_rng(int(rng.integers(2**63))),
                )
            )
        else:
            models.append(
                fit_gbrt(
                    X,
                    y,
                    rounds=cfg.learner.rounds,
                    learning_rate=cfg.learner.learning_rate,
                    max_depth=depth,
                    lam=cfg.learner.lam,
                    min_leaf=cfg.learner.min_leaf,
                )
            )
    return models


def _random_fallback(state: _RunState, rng, k: int) -> np.ndarray:
    # no feasible training rows (every evaluation failed so far): pick blind
    cand = np.setdiff1d(
        np.arange(state.space.size, dtype=np.int64), state.evaluated_flats()
    )
    if cand.size == 0:
        return cand
    logger.warning("no feasible training rows; picking uniformly at random")
    return rng.choice(cand, size=min(k, cand.size), replace=False)


def _run_baseline(state: _RunState, rng: np.random.Generator) -> None:
    cfg = state.config
    space = state.space
    if cfg.p > space.size:
        raise ConfigError("initial sample count exceeds the space size")
    state.evaluate_batch(
        rng.choice(space.size, size=cfg.p, replace=False), 0, "model_less"
    )
    total_iters = max(1, math.ceil((cfg.budget - cfg.p) / cfg.batch))
    n_obj = len(cfg.objectives)
    for i in range(1, total_iters + 1):
        if state.remaining == 0:
            return
        weights = draw_weights(rng, n_obj) if n_obj > 1 else None
        flats, labels = state.feasible_training()
        if len(flats) == 0:
            chosen = _random_fallback(state, rng, min(cfg.batch, state.remaining))
        else:
            models = _fit_models(state, flats, labels, cfg.depth_final, rng)
            chosen = refine_step_exploit(
                space,
                state.evaluated_flats(),
                models,
                cfg.resolved_senses,
                min(cfg.batch, state.remaining),
                weights,
            )
        if chosen.size == 0:
            return
        state.evaluate_batch(chosen, i, "exploit")


def _run_fist(
    state: _RunState, rng: np.random.Generator, importance_values
) -> None:
    cfg = state.config
    space = state.space
    if cfg.strategy == "fist_rand_importance":
        values = rng.permutation(space.num_features).astype(float) + 1.0
    else:
        if importance_values is None:
            raise ConfigError(
                f"strategy {cfg.strategy!r} requires an importance vector"
            )
        values = np.asarray(importance_values, dtype=float)
        if values.shape != (space.num_features,):
            raise ConfigError("importance vector length does not match the space")
    mask = _choose_mask(values, cfg.p, space)
    part = partition(space, mask)
    store = ApproxLabelStore(part)

    _, reps = model_less_sample(part, cfg.p, rng)
    for flat, vals in state.evaluate_batch(reps, 0, "model_less"):
        if vals is not None:
            store.apply(space.sample_at(flat), vals)

    total_iters = max(1, math.ceil((cfg.budget - cfg.p) / cfg.batch))
    schedule = DepthSchedule(cfg.depth_init, cfg.depth_final, total_iters)
    n_obj = len(cfg.objectives)
    exploring = cfg.strategy in _EXPLORING
    for i in range(1, total_iters + 1):
        if state.remaining == 0:
            return
        depth = (
            schedule.depth_at(i) if cfg.strategy in _DYNAMIC else cfg.depth_final
        )
        weights = draw_weights(rng, n_obj) if n_obj > 1 else None
        k_i = min(cfg.batch, state.remaining)
        chosen = np.empty(0, dtype=np.int64)
        phase = "exploit"
        if exploring and i <= cfg.theta:
            if len(store) == 0:
                chosen = _random_fallback(state, rng, k_i)
                phase = "explore"
            else:
                v_flats, v_labels = store.virtual_rows()
                models = _fit_models(state, v_flats, v_labels, depth, rng)
                chosen = refine_step_explore(
                    part,
                    store,
                    state.evaluated_flats(),
                    models,
                    cfg.resolved_senses,
                    k_i,
                    weights,
                )
                phase = "explore"
            if chosen.size == 0:
                logger.info(
                    "iteration %d: no unexplored clusters; advancing to exploitation",
                    i,
                )
                phase = "exploit"
        if phase == "exploit":
            flats, labels = state.feasible_training()
            if len(flats) == 0:
                chosen = _random_fallback(state, rng, k_i)
            else:
                models = _fit_models(state, flats, labels, depth, rng)
                chosen = refine_step_exploit(
                    space,
                    state.evaluated_flats(),
                    models,
                    cfg.resolved_senses,
                    k_i,
                    weights,
                )
            if chosen.size == 0:
                return
        results = state.evaluate_batch(chosen, i, phase)
        if phase == "explore":
            for flat, vals in results:
                sample = space.sample_at(flat)
                # the random fallback may hit an already-labeled cluster
                if vals is not None and part.cluster_id(sample) not in store:
                    store.apply(sample, vals)


def run(
    space: ParameterSpace,
    evaluator: Evaluator,
    config: TuneConfig,
    importance=None,
) -> RunLog:
    """Execute one tuning run and return its complete log."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    log = RunLog(config=config.as_dict(), seed=config.seed, records=[])
    state = _RunState(space, evaluator, config, log, time.perf_counter())
    if config.strategy == "random":
        flats = rng.choice(
            space.size, size=min(config.budget, space.size), replace=False
        )
        state.evaluate_batch(flats, 0, "model_less")
    elif config.strategy in ("baseline_rf", "baseline_xgb"):
        _run_baseline(state, rng)
    else:
        _run_fist(state, rng, importance)
    return log
