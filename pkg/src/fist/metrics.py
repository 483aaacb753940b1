"""Ground-truth evaluation: solution ranks, refinement cost, Pareto fronts,
and average distance from the reference set (ADRS)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .space import Dataset

_REFINE_PHASES = ("explore", "exploit")


def _signs(senses: Sequence[str]) -> np.ndarray:
    out = []
    for s in senses:
        if s == "min":
            out.append(1.0)
        elif s == "max":
            out.append(-1.0)
        else:
            raise ValueError(f"sense must be 'min' or 'max', got {s!r}")
    return np.asarray(out)


def _feasible_values(log, truth: Dataset, j: int) -> list[float]:
    vals = []
    for rec in log.records:
        if not rec.feasible:
            continue
        row = truth.rows.get(tuple(rec.sample))
        if row is None:
            raise ValueError(f"log sample {rec.sample} missing from the truth table")
        vals.append(row[j])
    return vals


def rank_of_best(log, truth: Dataset, objective: str) -> int:
    """Competition rank (1 = global optimum) of the best evaluated sample."""
    if not truth.complete:
        raise ValueError("rank_of_best requires a complete truth table")
    j = truth.objective_index(objective)
    sign = _signs(truth.senses)[j]
    vals = _feasible_values(log, truth, j)
    if not vals:
        raise ValueError("log has no feasible records")
    best = min(sign * v for v in vals)
    everything = sign * truth.objective_values(objective)
    return 1 + int(np.sum(everything < best))


def cost_to_rank(log, truth: Dataset, objective: str, target_rank: int):
    """1-based count of refinement evaluations until the run's best sample
    reaches rank <= target_rank; None if the log never reaches it.

    Model-less evaluations never increment the counter; a target already met
    during model-less sampling therefore reports cost 1 at the first
    refinement record.
    """
    if target_rank < 1:
        raise ValueError("target rank must be >= 1")
    if not truth.complete:
        raise ValueError("cost_to_rank requires a complete truth table")
    if not log.records:
        raise ValueError("empty log")
    j = truth.objective_index(objective)
    sign = _signs(truth.senses)[j]
    ordered = np.sort(sign * truth.objective_values(objective))
    best = np.inf
    cost = 0
    for rec in log.records:
        if rec.feasible:
            row = truth.rows.get(tuple(rec.sample))
            if row is None:
                raise ValueError(
                    f"log sample {rec.sample} missing from the truth table"
                )
            best = min(best, sign * row[j])
        if rec.phase in _REFINE_PHASES:
            cost += 1
            rank = 1 + int(np.searchsorted(ordered, best, side="left"))
            if rank <= target_rank:
                return cost
    return None


def pareto_front(points, senses: Sequence[str]) -> np.ndarray:
    """Exact non-dominated subset of a point cloud, as unique rows in
    lexicographic order."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    if P.size == 0:
        raise ValueError("empty point set")
    if not np.isfinite(P).all():
        raise ValueError("points must be finite")
    signs = _signs(senses)
    if P.shape[1] != signs.size:
        raise ValueError("points and senses have mismatched dimensions")
    M = P * signs  # minimized form
    order = np.lexsort(M.T[::-1])  # lexicographic over rows
    kept: list[int] = []
    for i in order:
        if kept:
            F = M[kept]
            dominated = bool(
                np.any(np.all(F <= M[i], axis=1) & np.any(F < M[i], axis=1))
            )
            if dominated:
                continue
        kept.append(int(i))
    return np.unique(P[kept], axis=0)


def adrs(truth_front, approx_front, senses: Sequence[str]) -> float:
    """Average over the true front of the smallest relative regression to any
    approximate-front point.

    delta(tau, lam) = max(0, max_j (lam_j - tau_j) / tau_j) over minimized
    objectives; maximized objectives are negated and shifted strictly positive
    (shift = 1 + |min over both fronts|) first.  All minimized values must be
    strictly positive.
    """
    T = np.asarray(truth_front, dtype=float)
    L = np.asarray(approx_front, dtype=float)
    if T.ndim == 1:
        T = T.reshape(1, -1)
    if L.ndim == 1:
        L = L.reshape(1, -1)
    if T.size == 0 or L.size == 0:
        raise ValueError("fronts must be non-empty")
    if T.shape[1] != L.shape[1]:
        raise ValueError("fronts have different objective counts")
    signs = _signs(senses)
    if T.shape[1] != signs.size:
        raise ValueError("fronts and senses have mismatched dimensions")
    T = T.copy()
    L = L.copy()
    for j, s in enumerate(senses):
        if s == "max":
            T[:, j] = -T[:, j]
            L[:, j] = -L[:, j]
            shift = 1.0 + abs(min(T[:, j].min(), L[:, j].min()))
            T[:, j] += shift
            L[:, j] += shift
    if (T <= 0).any() or (L <= 0).any():
        raise ValueError("ADRS requires strictly positive objective values")
    rel = (L[None, :, :] - T[:, None, :]) / T[:, None, :]
    delta = np.maximum(rel.max(axis=2), 0.0)
    return float(delta.min(axis=1).mean())


def _log_metrics(
    log, truth: Dataset, objective: str | None, target_rank: int | None
) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    if objective is not None:
        out["best_rank"] = float(rank_of_best(log, truth, objective))
        if target_rank is not None:
            cost = cost_to_rank(log, truth, objective, target_rank)
            out[f"cost_to_rank@{target_rank}"] = None if cost is None else float(cost)
    else:
        truth_front = pareto_front(truth.values_matrix(), truth.senses)
        pts = []
        for rec in log.records:
            if rec.feasible:
                pts.append([rec.objectives[n] for n in truth.objective_names])
        if not pts:
            raise ValueError("log has no feasible records")
        approx = pareto_front(np.asarray(pts), truth.senses)
        out["adrs"] = adrs(truth_front, approx, truth.senses)
    return out


def summarize_trials(
    logs: Sequence,
    truth: Dataset,
    objective: str | None = None,
    target_rank: int | None = None,
) -> dict[str, dict[str, float]]:
    """Per-metric mean, population std, and count over a list of run logs.

    With an objective name the metrics are best_rank (plus cost_to_rank when a
    target is given); without one the logs are scored by ADRS against the
    truth table's Pareto front.  Logs that never reach the rank target are
    excluded from that metric's count.
    """
    if not logs:
        raise ValueError("need at least one log")
    shapes = {repr(log.config.get("objectives")) for log in logs}
    if len(shapes) != 1:
        raise ValueError("logs have mixed objective configurations")
    rows = [_log_metrics(log, truth, objective, target_rank) for log in logs]
    out: dict[str, dict[str, float]] = {}
    for key in rows[0]:
        vals = [r[key] for r in rows if r[key] is not None]
        if vals:
            arr = np.asarray(vals, dtype=float)
            out[key] = {
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "count": len(vals),
            }
        else:
            out[key] = {"mean": float("nan"), "std": float("nan"), "count": 0}
    return out
