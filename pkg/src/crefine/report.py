"""Batch report rendering: plain-text tables and a machine-readable dict.

Percentages are rendered from the underlying counts with half-up rounding
to two decimals; other statistics use standard float formatting.
"""

from __future__ import annotations

from decimal import Decimal, ROUND_HALF_UP

from .domain import SubsetLabel
from .harness import ACTION_NAMES, BatchReport
from .orchestrator import Category

CATEGORY_LABELS = {
    Category.ALREADY_COMPLIANT: "already_compliant",
    Category.UNCHANGED_COMPLIANCE: "unchanged_compliance",
    Category.INCREASED_COMPLIANCE: "increased_compliance",
}

_GROUP_ORDER = ("overall",) + tuple(CATEGORY_LABELS.values())


def pct_str(count: int, total: int) -> str:
    """Exact percentage of count/total, two decimals, half-up."""
    if total == 0:
        return "0.00"
    value = Decimal(100 * count) / Decimal(total)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_report(
    report: BatchReport, by_subset: bool = False, actions: bool = False
) -> str:
    lines: list[str] = []
    lines.append("== Compliance categories ==")
    header = f"{'n':>6}  {'already_compliant':>18}  {'unchanged_compliance':>21}  {'increased_compliance':>21}"
    lines.append(header)
    n = report.n_samples
    lines.append(
        f"{n:>6}  "
        f"{pct_str(report.counts[Category.ALREADY_COMPLIANT], n):>18}  "
        f"{pct_str(report.counts[Category.UNCHANGED_COMPLIANCE], n):>21}  "
        f"{pct_str(report.counts[Category.INCREASED_COMPLIANCE], n):>21}"
    )
    lines.append("")
    lines.append("== Compliance deltas ==")
    lines.append(f"avg delta (all samples):   {report.avg_delta_all:.4f}")
    lines.append(f"avg delta (improved only): {report.avg_delta_improved:.4f}")
    lines.append("")
    lines.append("== Iterations per category ==")
    for name in _GROUP_ORDER:
        lines.append(f"{name:<22} {report.avg_iterations_by_category[name]:.2f}")
    if report.failures:
        lines.append("")
        lines.append(f"failed samples: {report.failures}")

    if by_subset:
        lines.append("")
        lines.append("== Subset breakdown ==")
        lines.append(
            f"{'subset':<10} {'n':>5} {'avg':>8} {'stdev':>8} "
            f"{'already%':>9} {'unchanged%':>11} {'increased%':>11}"
        )
        for label in (SubsetLabel.EASY, SubsetLabel.HARD, SubsetLabel.UNLABELED):
            stats = report.per_subset[label]
            if stats.n == 0 and label is SubsetLabel.UNLABELED:
                continue
            lines.append(
                f"{label.value:<10} {stats.n:>5} {stats.avg_delta:>8.4f} "
                f"{stats.stdev_delta:>8.4f} "
                f"{pct_str(stats.counts[Category.ALREADY_COMPLIANT], stats.n):>9} "
                f"{pct_str(stats.counts[Category.UNCHANGED_COMPLIANCE], stats.n):>11} "
                f"{pct_str(stats.counts[Category.INCREASED_COMPLIANCE], stats.n):>11}"
            )

    if actions:
        lines.append("")
        lines.append("== Planner action frequency (mean per run) ==")
        lines.append(
            f"{'category':<22} " + " ".join(f"{a:>9}" for a in ACTION_NAMES)
        )
        for name in _GROUP_ORDER:
            freq = report.action_frequency_by_category[name]
            lines.append(
                f"{name:<22} " + " ".join(f"{freq[a]:>9.2f}" for a in ACTION_NAMES)
            )
    return "\n".join(lines) + "\n"


def render_sweep(rows: list[tuple[int, float]]) -> str:
    lines = ["== Increased-compliance rate by strategy count ==", f"{'k':>3}  {'increased%':>10}"]
    for k, pct in rows:
        lines.append(f"{k:>3}  {pct:>10.2f}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: BatchReport) -> dict:
    """Machine-readable summary mirroring the printed tables."""
    return {
        "n_samples": report.n_samples,
        "counts": {
            CATEGORY_LABELS[c]: report.counts[c] for c in Category
        },
        "pct_already_compliant": report.pct_already_compliant,
        "pct_unchanged": report.pct_unchanged,
        "pct_increased": report.pct_increased,
        "avg_delta_all": report.avg_delta_all,
        "avg_delta_improved": report.avg_delta_improved,
        "failures": report.failures,
        "avg_iterations_by_category": dict(report.avg_iterations_by_category),
        "action_frequency_by_category": {
            name: dict(freq)
            for name, freq in report.action_frequency_by_category.items()
        },
        "per_subset": {
            label.value: {
                "n": stats.n,
                "counts": {CATEGORY_LABELS[c]: stats.counts[c] for c in Category},
                "avg_delta": stats.avg_delta,
                "stdev_delta": stats.stdev_delta,
            }
            for label, stats in report.per_subset.items()
        },
        "per_sample": [
            {
                "sample_id": row.sample_id,
                "subset": row.subset.value,
                "category": CATEGORY_LABELS[row.category],
                "baseline_score": row.baseline_score,
                "final_score": row.final_score,
                "delta": row.delta,
                "iterations_run": row.iterations_run,
                "chosen_actions": list(row.chosen_actions),
                "failed": row.failed,
            }
            for row in report.per_sample
        ],
    }
