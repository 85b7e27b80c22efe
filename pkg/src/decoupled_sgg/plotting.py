"""Static PNG charts for loss logs and evaluation reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=80, metadata=_META)
    plt.close(fig)
    return path


def plot_loss_log(rows: list[dict], out_dir, stem: str = "loss") -> list[Path]:
    """One line chart per loss column."""
    if not rows:
        raise ConfigError("loss log is empty")
    steps = [int(r["step"]) for r in rows]
    written = []
    for col in (c for c in rows[0] if c != "step"):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(steps, [float(r[col]) for r in rows], lw=1)
        ax.set_xlabel("step")
        ax.set_ylabel(col)
        ax.set_yscale("log" if all(float(r[col]) > 0 for r in rows) else "linear")
        fig.tight_layout()
        written.append(_save(fig, Path(out_dir) / f"{stem}_{col}.png"))
    return written


def plot_reports(reports: dict[str, dict], out_dir) -> list[Path]:
    """One bar chart per metric (recall per partition and K, mAP per partition) across reports."""
    if not reports:
        raise ConfigError("no reports to plot")
    names = list(reports)
    series = {}
    for name in names:
        rep = reports[name]
        for part, by_k in rep.get("recall", {}).items():
            for k, v in by_k.items():
                series.setdefault(f"{part}_R@{k}", {})[name] = v
        for part, v in rep.get("map", {}).items():
            series.setdefault(f"{part}_mAP", {})[name] = v
    written = []
    for metric in sorted(series):
        vals = [series[metric].get(n) or 0.0 for n in names]
        fig, ax = plt.subplots(figsize=(max(3, 0.8 * len(names) + 1), 3))
        ax.bar(range(len(names)), vals)
        ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
        ax.set_ylim(0, 1)
        ax.set_title(metric)
        fig.tight_layout()
        written.append(_save(fig, Path(out_dir) / f"{metric.replace('@', '_at_')}.png"))
    return written
