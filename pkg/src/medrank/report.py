"""Metric report output: delimited files, aligned text tables, and figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricReport


def write_metric_tsv(reports: list[MetricReport], path: str | Path) -> None:
    """One ``metric<TAB>topic<TAB>value`` line per topic, plus an ``all``
    line carrying the mean, mirroring the external evaluator's layout."""
    lines = []
    for report in reports:
        for topic_id in sorted(report.per_topic):
            lines.append(
                f"{report.metric_name}\t{topic_id}\t{report.per_topic[topic_id]:.4f}"
            )
        lines.append(f"{report.metric_name}\tall\t{report.mean:.4f}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def summary_table(
    rows: list[tuple[str, dict[str, float]]],
    columns: list[str],
    groups: list[tuple[str, int]] | None = None,
    stars: dict[tuple[str, str], bool] | None = None,
) -> str:
    """Aligned text table: one row per run, one column per metric.

    ``groups`` optionally spans a header over consecutive columns (e.g.
    unjudged vs judged-only blocks); ``stars`` marks (row, column) cells.
    """
    stars = stars or {}
    name_width = max([len(name) for name, _ in rows] + [len("run")])
    col_width = max([len(c) for c in columns] + [9])
    header = "run".ljust(name_width)
    for col in columns:
        header += "  " + col.rjust(col_width)
    lines = []
    if groups:
        group_line = " " * name_width
        for label, span in groups:
            width = span * (col_width + 2)
            group_line += label.center(width)
        lines.append(group_line.rstrip())
    lines.append(header)
    lines.append("-" * len(header))
    for name, values in rows:
        line = name.ljust(name_width)
        for col in columns:
            value = values.get(col)
            if value is None:
                cell = "-"
            else:
                cell = f"{value:.4f}" + ("*" if stars.get((name, col)) else "")
            line += "  " + cell.rjust(col_width)
        lines.append(line)
    return "\n".join(lines)


def render_metric_figures(
    reports: list[MetricReport], out_dir: str | Path, stem: str = "metrics"
) -> list[Path]:
    """Render one per-topic bar chart per metric; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for report in reports:
        topics = sorted(report.per_topic)
        values = [report.per_topic[t] for t in topics]
        fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(topics)), 3.5))
        ax.bar(np.arange(len(topics)), values, color="#4878a8")
        ax.axhline(report.mean, color="#b04a4a", linewidth=1.2,
                   label=f"mean = {report.mean:.4f}")
        ax.set_xticks(np.arange(len(topics)))
        ax.set_xticklabels(topics, rotation=90, fontsize=7)
        ax.set_ylabel(report.metric_name)
        ax.set_xlabel("topic")
        ax.set_ylim(0.0, 1.05)
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        safe = report.metric_name.replace("@", "").replace("/", "-")
        path = out_dir / f"{stem}_{safe}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_comparison_figure(
    rows: list[tuple[str, dict[str, float]]],
    columns: list[str],
    path: str | Path,
) -> Path:
    """Grouped bar chart of mean metric values across runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_runs = len(rows)
    x = np.arange(len(columns))
    width = 0.8 / max(n_runs, 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(columns)), 4.0))
    for i, (name, values) in enumerate(rows):
        heights = [values.get(c, 0.0) for c in columns]
        ax.bar(x + i * width, heights, width, label=name)
    ax.set_xticks(x + width * (n_runs - 1) / 2)
    ax.set_xticklabels(columns, fontsize=8)
    ax.set_ylabel("mean value")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
