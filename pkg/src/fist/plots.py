"""Figure rendering for benchmark reports.

Figures are written next to the CSV outputs; the CSVs stay the machine-read
contract, the PNGs are for eyeballs.  Uses the Agg backend so rendering works
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = ["o", "s", "^", "d", "v", "*", "x", "+"]


def render_metric_curves(summary_rows: list[dict], metric: str, path) -> Path:
    """Mean +/- std of one metric versus budget, one line per strategy."""
    strategies = sorted({r["strategy"] for r in summary_rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, strategy in enumerate(strategies):
        rows = sorted(
            (
                r
                for r in summary_rows
                if r["strategy"] == strategy and r["metric"] == metric
            ),
            key=lambda r: r["budget"],
        )
        if not rows:
            continue
        budgets = [r["budget"] for r in rows]
        means = [r["mean"] for r in rows]
        stds = [r["std"] for r in rows]
        ax.errorbar(
            budgets,
            means,
            yerr=stds,
            marker=_MARKERS[i % len(_MARKERS)],
            capsize=3,
            label=strategy,
        )
    ax.set_xlabel("budget (evaluations)")
    ax.set_ylabel(f"mean {metric}")
    ax.set_title(f"{metric} vs. budget")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def render_sigma_bars(sigma_rows: list[dict], path) -> Path:
    """Grouped bars of the three sampling standard deviations per objective."""
    modes = ("sigma_random", "sigma_in_cluster", "sigma_cross_cluster")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.8 / max(1, len(sigma_rows))
    for i, row in enumerate(sigma_rows):
        xs = [j + i * width for j in range(len(modes))]
        ax.bar(xs, [row[m] for m in modes], width=width, label=row.get("objective"))
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(modes))])
    ax.set_xticklabels([m.removeprefix("sigma_") for m in modes])
    ax.set_ylabel("mean group std")
    ax.set_title("sampling similarity")
    if len(sigma_rows) > 1:
        ax.legend()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
