"""Static SVG plots of benchmark results (metric vs. sweep axis)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path


def plot_records(records, output_dir) -> list[Path]:
    """Emit one metric-vs-axis line plot per (task, metric) group with error bars.

    Records without an axis are skipped; matplotlib is imported lazily so the
    dependency is only needed when plotting is requested.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = defaultdict(list)
    for record in records:
        if record.axis is not None:
            key = (record.task, record.metric, record.axis)
            groups[key].append(record)

    written = []
    outdir = Path(output_dir)
    for (task, metric, axis), recs in groups.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        series = defaultdict(list)
        for record in recs:
            label = record.mode
            if "band" in record.extra:
                label = f"band {record.extra['band']}"
            series[label].append((record.axis_value, record.mean, record.std))
        for label, points in sorted(series.items()):
            points.sort()
            xs = [p[0] for p in points]
            ys = [p[1] for p in points]
            es = [p[2] for p in points]
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=label)
        ax.set_xlabel(axis)
        ax.set_ylabel(metric.upper())
        if metric == "ser":
            ax.set_yscale("log")
        ax.set_title(f"{task}: {metric.upper()} vs {axis}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        path = outdir / f"{task}_{metric}_vs_{axis}.svg"
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
