"""Benchmark figure rendering.

Renders per-method box plots of the campaign metrics to PNG files next to
the delimited output.  Figures are a presentation convenience; results.csv
and summary.json remain the canonical outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["render_benchmark_figures"]

_METRIC_LABELS = {
    "a_top": "fraction of recoverable edges",
    "shd": "structural Hamming distance",
    "f1": "edge F1",
    "runtime_ms": "runtime (ms)",
}


def _collect(rows: list[dict], metric: str) -> dict[str, list[float]]:
    by_method: dict[str, list[float]] = {}
    for row in rows:
        if row["status"] != "ok" or row[metric] in ("", None):
            continue
        by_method.setdefault(row["method"], []).append(float(row[metric]))
    return by_method


def render_benchmark_figures(rows: list[dict], output_dir: str | Path) -> list[Path]:
    """Write one box plot per populated metric; returns the written paths."""
    output_dir = Path(output_dir)
    written: list[Path] = []
    for metric, ylabel in _METRIC_LABELS.items():
        by_method = _collect(rows, metric)
        if not by_method or all(len(v) == 0 for v in by_method.values()):
            continue
        methods = sorted(by_method)
        fig, ax = plt.subplots(figsize=(1.8 + 1.2 * len(methods), 3.4))
        ax.boxplot(
            [by_method[m] for m in methods],
            tick_labels=methods,
            showmeans=True,
            meanline=True,
        )
        ax.set_ylabel(ylabel)
        ax.set_title(metric)
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        path = output_dir / f"benchmark_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
