"""Grade-report rendering: aligned text table and accuracy figure."""

from __future__ import annotations

from pathlib import Path

from .grader import GradeReport
from .views import parse_view


def _sorted_axes(report: GradeReport) -> tuple[list[str], list[str]]:
    datasets = sorted({dataset for dataset, _ in report.cells})
    view_tags = sorted(
        {tag for _, tag in report.cells}, key=lambda t: parse_view(t).sort_key()
    )
    return datasets, view_tags


def render_table(report: GradeReport) -> str:
    """Datasets as rows, views as columns, ``acc% (correct/n)`` cells."""
    datasets, view_tags = _sorted_axes(report)
    if not datasets:
        return "(empty report)\n"
    rows = []
    for dataset in datasets:
        row = [dataset]
        for tag in view_tags:
            cell = report.cells.get((dataset, tag))
            if cell is None or cell.n == 0:
                row.append("-")
            else:
                row.append(f"{100 * cell.accuracy:.1f}% ({cell.n_correct}/{cell.n})")
        rows.append(row)
    header = ["dataset"] + view_tags
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def save_figure(report: GradeReport, path: str | Path) -> None:
    """Grouped per-view accuracy bars, one group per dataset."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    datasets, view_tags = _sorted_axes(report)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.8 * len(datasets)), 3.2))
    width = 0.8 / max(1, len(view_tags))
    for j, tag in enumerate(view_tags):
        xs, ys = [], []
        for i, dataset in enumerate(datasets):
            cell = report.cells.get((dataset, tag))
            if cell is None or cell.n == 0:
                continue
            xs.append(i + j * width)
            ys.append(100 * cell.accuracy)
        ax.bar(xs, ys, width=width, label=tag)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(datasets))])
    ax.set_xticklabels(datasets)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
