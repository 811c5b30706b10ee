"""Report figures: render run statistics to image files next to the
persisted-products table."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .executor import ExecutionReport


def _bar_figure(labels: list[str], values: list[int], title: str, ylabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(labels) + 2.0), 3.5))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(result: ExecutionReport, out_dir: str | Path) -> list[Path]:
    """Write one figure for per-level cell counts and one for per-node
    activity; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    hierarchy = result.summary.hierarchy
    levels = list(hierarchy.levels)
    counts = [result.summary.count(level) for level in levels]
    path = out / "cells_per_level.png"
    _bar_figure(levels, counts, "Cells processed per level", "cells", path)
    created.append(path)

    if result.invocations:
        nodes = sorted(result.invocations)
        path = out / "node_invocations.png"
        _bar_figure(
            nodes,
            [result.invocations[n] for n in nodes],
            "Operator invocations per node",
            "invocations",
            path,
        )
        created.append(path)
    return created
