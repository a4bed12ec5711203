"""Render report figures to files (headless Agg backend).

The eval path draws per-query metric bars; the sweep path draws metric
curves against the swept parameter, mirroring how hyperparameter scans
are usually read.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import MetricReport
from .runner import SweepRow


def save_report_figure(reports: list[MetricReport], path) -> None:
    """Bar chart of per-query values per metric, mean drawn as a line."""
    fig, axes = plt.subplots(
        1, len(reports), figsize=(5.5 * len(reports), 3.6), squeeze=False
    )
    for ax, report in zip(axes[0], reports):
        query_ids = list(report.per_query.keys())
        values = [report.per_query[q] for q in query_ids]
        ax.bar(range(len(values)), values, color="#30608a")
        ax.axhline(report.mean, color="#c2502a", linestyle="--", linewidth=1.2,
                   label=f"mean {report.mean:.4f}")
        ax.set_xticks(range(len(query_ids)))
        ax.set_xticklabels(query_ids, rotation=45, ha="right", fontsize=7)
        ax.set_ylim(0.0, 1.05)
        ax.set_title(f"{report.metric}@{report.k}")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(rows: list[SweepRow], param: str, path) -> None:
    """Metric means against one swept parameter; failed cells are skipped."""
    ok_rows = [r for r in rows if r.status == "ok"]
    if not ok_rows:
        return
    metric_names = list(ok_rows[0].metrics.keys())
    labels = [
        "flex" if r.params[param] is None else str(r.params[param]) for r in ok_rows
    ]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    x = range(len(ok_rows))
    for name, color in zip(metric_names, ("#30608a", "#c2502a", "#4a8a4f")):
        ax.plot(x, [r.metrics[name] for r in ok_rows], marker="o", color=color,
                label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_xlabel(param)
    ax.set_ylabel("macro mean")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
