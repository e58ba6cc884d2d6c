"""Matplotlib renderings of a batch report, written as PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ACTION_NAMES, BatchReport
from .orchestrator import Category

_CATEGORY_ORDER = (
    Category.ALREADY_COMPLIANT,
    Category.UNCHANGED_COMPLIANCE,
    Category.INCREASED_COMPLIANCE,
)
_CATEGORY_TICKS = ("already\ncompliant", "unchanged\ncompliance", "increased\ncompliance")


def save_report_figures(report: BatchReport, out_dir: str | Path) -> list[Path]:
    """Render the report's tables as figures; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _categories_figure(report, out / "categories.png"),
        _deltas_figure(report, out / "deltas.png"),
        _iterations_figure(report, out / "iterations.png"),
        _actions_figure(report, out / "actions.png"),
    ]
    return written


def _categories_figure(report: BatchReport, path: Path) -> Path:
    pcts = [
        report.pct_already_compliant,
        report.pct_unchanged,
        report.pct_increased,
    ]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bars = ax.bar(range(3), pcts, color=["#7f7f7f", "#d62728", "#2ca02c"])
    ax.bar_label(bars, fmt="%.2f")
    ax.set_xticks(range(3), _CATEGORY_TICKS)
    ax.set_ylabel("share of samples (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"Compliance categories (n={report.n_samples})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _deltas_figure(report: BatchReport, path: Path) -> Path:
    deltas = [row.delta for row in report.per_sample if not row.failed]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if deltas:
        ax.hist(deltas, bins=min(20, max(5, len(deltas))), color="#1f77b4")
        ax.axvline(report.avg_delta_all, color="#d62728", linestyle="--",
                   label=f"mean {report.avg_delta_all:.4f}")
        ax.legend()
    ax.set_xlabel("final - baseline compliance")
    ax.set_ylabel("samples")
    ax.set_title("Compliance score deltas")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _iterations_figure(report: BatchReport, path: Path) -> Path:
    names = ["overall"] + [c.value for c in _CATEGORY_ORDER]
    values = [report.avg_iterations_by_category[n] for n in names]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    bars = ax.bar(range(len(names)), values, color="#1f77b4")
    ax.bar_label(bars, fmt="%.2f")
    ax.set_xticks(range(len(names)), ["overall", *_CATEGORY_TICKS])
    ax.set_ylabel("avg iterations")
    ax.set_title("Refinement cycles per category")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _actions_figure(report: BatchReport, path: Path) -> Path:
    names = ["overall"] + [c.value for c in _CATEGORY_ORDER]
    width = 0.8 / len(ACTION_NAMES)
    fig, ax = plt.subplots(figsize=(6.5, 3.5))
    for i, action in enumerate(ACTION_NAMES):
        xs = [j + i * width for j in range(len(names))]
        ys = [report.action_frequency_by_category[n][action] for n in names]
        ax.bar(xs, ys, width=width, label=action)
    ax.set_xticks(
        [j + width * (len(ACTION_NAMES) - 1) / 2 for j in range(len(names))],
        ["overall", *_CATEGORY_TICKS],
    )
    ax.set_ylabel("mean chosen per run")
    ax.set_title("Planner action frequency")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
