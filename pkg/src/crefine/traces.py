"""Trace records: one JSON document per run, append-only, schema-versioned.

A trace is sufficient to recompute every batch statistic without calling
any backend again, which is what makes `report` a pure offline command.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from pathlib import Path

from .domain import ComplianceReport, Sample, SubsetLabel
from .harness import RunStats
from .orchestrator import Category, RunConfig, RunOutcome

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRACE_SUFFIX = ".trace.jsonl"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def trace_filename(sample_id: str) -> str:
    safe = _UNSAFE.sub("_", sample_id) or "sample"
    if safe != sample_id:
        safe += "-" + hashlib.sha256(sample_id.encode("utf-8")).hexdigest()[:8]
    return safe + TRACE_SUFFIX


def _report_block(report: ComplianceReport) -> dict:
    return {
        "raw_scores": [list(row) for row in report.raw_judge_scores],
        "per_response_mean": list(report.per_response_mean),
        "overall": report.overall,
    }


def config_snapshot(config: RunConfig) -> dict:
    return {
        "n_max": config.n_max,
        "p_max": config.p_max,
        "k_strategies": config.k_strategies,
        "n_responses": config.n_responses,
        "ablate_scores": config.ablate_scores,
        "generator": config.generator_backend.describe(),
        "agents": config.agent_backend.describe(),
    }


def build_trace(
    sample: Sample,
    config: RunConfig,
    outcome: RunOutcome,
    started: str,
    finished: str,
) -> dict:
    state = outcome.trace
    iterations = []
    for record in state.history:
        iterations.append(
            {
                "index": record.iteration_index,
                "feedback": record.feedback_summary,
                "directives": [
                    {"action": d.action.value, "how_to_edit": d.how_to_edit}
                    for d in record.directives
                ],
                "candidates": [
                    {
                        "constraints": list(c.constraint_set.constraints),
                        "directive": {
                            "action": c.constraint_set.lineage[-1].action.value,
                            "how_to_edit": c.constraint_set.lineage[-1].how_to_edit,
                        },
                        "responses": list(c.responses),
                        **_report_block(c.report),
                    }
                    for c in record.candidates
                ],
                "chosen_index": record.chosen_index,
                "errors": list(record.errors),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "sample_id": sample.id,
        "subset": sample.subset_label.value,
        "config": config_snapshot(config),
        "started": started,
        "finished": finished,
        "baseline": {
            "constraints": list(state.baseline.constraint_set.constraints),
            "responses": list(state.baseline.responses),
            **_report_block(state.baseline.report),
        },
        "iterations": iterations,
        "outcome": {
            "category": outcome.category.value,
            "final_constraints": list(outcome.final_set.constraints),
            "final_score": outcome.final_score,
            "baseline_score": outcome.baseline_score,
            "iterations_run": outcome.iterations_run,
            "terminated_reason": (
                state.terminated_reason.value if state.terminated_reason else None
            ),
        },
        "error": outcome.error,
    }


def build_error_trace(
    sample: Sample,
    config: RunConfig,
    message: str,
    started: str,
    finished: str,
) -> dict:
    """Trace for a sample whose run failed before producing an outcome."""
    return {
        "schema_version": SCHEMA_VERSION,
        "sample_id": sample.id,
        "subset": sample.subset_label.value,
        "config": config_snapshot(config),
        "started": started,
        "finished": finished,
        "baseline": None,
        "iterations": [],
        "outcome": {
            "category": Category.UNCHANGED_COMPLIANCE.value,
            "final_constraints": list(sample.translated_constraints or ()),
            "final_score": None,
            "baseline_score": None,
            "iterations_run": 0,
            "terminated_reason": None,
        },
        "error": message,
    }


def trace_line(trace: dict) -> str:
    return json.dumps(trace, sort_keys=True, ensure_ascii=False)


def append_trace(trace_dir: str | Path, trace: dict) -> Path:
    path = Path(trace_dir) / trace_filename(trace["sample_id"])
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(trace_line(trace))
        handle.write("\n")
    return path


def read_traces(trace_dir: str | Path) -> tuple[list[dict], int]:
    """All trace records in a directory, plus the count of corrupt lines."""
    records: list[dict] = []
    skipped = 0
    for path in sorted(Path(trace_dir).glob("*" + TRACE_SUFFIX)):
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    if not isinstance(record, dict) or "outcome" not in record:
                        raise ValueError("not a trace record")
                except (json.JSONDecodeError, ValueError) as exc:
                    skipped += 1
                    log.warning("skipping corrupt trace %s:%d: %s", path, lineno, exc)
                    continue
                records.append(record)
    return records, skipped


def stats_from_trace(trace: dict) -> RunStats:
    outcome = trace["outcome"]
    actions = []
    for iteration in trace.get("iterations", ()):
        chosen = iteration["candidates"][iteration["chosen_index"]]
        actions.append(chosen["directive"]["action"])
    return RunStats(
        sample_id=trace["sample_id"],
        subset=SubsetLabel(trace.get("subset", "unlabeled")),
        category=Category(outcome["category"]),
        baseline_score=outcome["baseline_score"],
        final_score=outcome["final_score"],
        iterations_run=outcome["iterations_run"],
        chosen_actions=tuple(actions),
        failed=trace.get("error") is not None,
    )
