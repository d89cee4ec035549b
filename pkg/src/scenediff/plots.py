"""Report figures, rendered headlessly next to their CSV counterparts.

PNG output is kept byte-reproducible: fixed dpi, fixed metadata, no
timestamps. Both figures read the same structures the CSV writers consume.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import RankReport

_SAVE_KWARGS = {"format": "png", "dpi": 100, "metadata": {"Software": "scenediff"}}


def save_rank_report_figure(report: RankReport, path: Path | str) -> None:
    """Per-box best ranks on a log scale; uncovered boxes marked at the top."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    covered = [(i, b.rank) for i, b in enumerate(report.boxes) if b.rank is not None]
    uncovered = [i for i, b in enumerate(report.boxes) if b.rank is None]
    if covered:
        ax.bar([i for i, _ in covered], [r for _, r in covered], color="#31688e")
    if uncovered:
        top = max((r for _, r in covered), default=1)
        ax.plot(uncovered, [top] * len(uncovered), "x", color="#d62728",
                label="uncovered")
        ax.legend(loc="upper right")
    ax.set_yscale("log")
    ax.set_xlabel("ground-truth box")
    ax.set_ylabel("best in-box rank (lower is better)")
    ax.set_title(f"{report.covered_count}/{len(report.boxes)} boxes covered, "
                 f"{report.total_features} features ranked")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_rank_error_figure(rows: list[tuple[int, int | None, float]],
                           path: Path | str) -> None:
    """Best rank against localization error, one point per query."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    xs = [err for _, rank, err in rows if rank is not None]
    ys = [rank for _, rank, _ in rows if rank is not None]
    if xs:
        ax.scatter(xs, ys, color="#31688e", alpha=0.8)
        ax.set_yscale("log")
    ax.set_xlabel("localization error (m)")
    ax.set_ylabel("best in-box rank")
    ax.set_title("rank vs localization error")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
