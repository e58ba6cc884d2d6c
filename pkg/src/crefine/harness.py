"""Dataset ingestion, batch execution, and the evaluation-protocol arithmetic.

Batch statistics are computed from lightweight per-run ``RunStats`` rows so
the same aggregation path serves both live outcomes and persisted traces.
"""

from __future__ import annotations

import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .agents import generate, judge_all, translate_question
from .backend import Backend, ChatRequest
from .domain import EditAction, Sample, SubsetLabel
from .errors import CrefineError, ValidationError
from .orchestrator import Category, RunConfig, RunOutcome, run
from .prompts import (
    AgentPromptTemplates,
    DEFAULT_TEMPLATES,
    build_bare_generation_prompt,
)

log = logging.getLogger(__name__)

_REQUIRED_FIELDS = ("id", "instruction", "decomposed_questions")

ACTION_NAMES = tuple(a.value for a in EditAction)


@dataclass(frozen=True)
class DatasetFile:
    records: tuple[Sample, ...]
    path: str | None = None

    @property
    def pending_translation(self) -> tuple[str, ...]:
        return tuple(
            s.id for s in self.records if s.translated_constraints is None
        )


def _sample_from_record(record: dict, where: str) -> Sample:
    for field in _REQUIRED_FIELDS:
        if field not in record:
            raise ValidationError(f"{where}: missing field {field!r}")
    questions = record["decomposed_questions"]
    if not isinstance(questions, list) or not all(isinstance(q, str) for q in questions):
        raise ValidationError(f"{where}: decomposed_questions must be a list of strings")
    constraints = record.get("translated_constraints")
    if constraints is not None and (
        not isinstance(constraints, list)
        or not all(isinstance(c, str) for c in constraints)
    ):
        raise ValidationError(f"{where}: translated_constraints must be a list of strings")
    subset = record.get("subset")
    if subset is None:
        label = SubsetLabel.UNLABELED
    else:
        try:
            label = SubsetLabel(str(subset).lower())
        except ValueError:
            raise ValidationError(f"{where}: unknown subset {subset!r}") from None
    try:
        return Sample(
            id=str(record["id"]),
            instruction=record["instruction"],
            user_input=record.get("user_input") or "",
            decomposed_questions=tuple(questions),
            translated_constraints=tuple(constraints) if constraints is not None else None,
            subset_label=label,
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def sample_to_record(sample: Sample) -> dict:
    record = {
        "id": sample.id,
        "instruction": sample.instruction,
        "user_input": sample.user_input,
        "decomposed_questions": list(sample.decomposed_questions),
    }
    if sample.translated_constraints is not None:
        record["translated_constraints"] = list(sample.translated_constraints)
    if sample.subset_label is not SubsetLabel.UNLABELED:
        record["subset"] = sample.subset_label.value.capitalize()
    return record


def ingest(path: str) -> DatasetFile:
    """Parse a line-delimited JSON dataset, validating every record."""
    samples: list[Sample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: malformed JSON: {exc}") from None
            sample = _sample_from_record(record, where)
            if sample.id in seen:
                raise ValidationError(f"{where}: duplicate id {sample.id!r}")
            seen.add(sample.id)
            samples.append(sample)
    if not samples:
        log.warning("dataset %s is empty", path)
    return DatasetFile(records=tuple(samples), path=path)


def write_dataset(dataset: DatasetFile, path: str) -> None:
    """Serialize records one JSON document per line, in a canonical field order."""
    with open(path, "w", encoding="utf-8") as handle:
        for sample in dataset.records:
            handle.write(json.dumps(sample_to_record(sample), ensure_ascii=False))
            handle.write("\n")


@dataclass(frozen=True)
class TranslationResult:
    dataset: DatasetFile
    failures: tuple[tuple[str, str], ...]  # (sample id, error message)


def translate_all(
    dataset: DatasetFile,
    backend: Backend,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> TranslationResult:
    """Fill in translated_constraints for every untranslated sample.

    Already-translated samples pass through untouched, so the operation is
    idempotent. Per-sample failures are collected rather than fatal.
    """
    out: list[Sample] = []
    failures: list[tuple[str, str]] = []
    for sample in dataset.records:
        if sample.translated_constraints is not None:
            out.append(sample)
            continue
        try:
            constraints = tuple(
                translate_question(q, backend, templates)
                for q in sample.decomposed_questions
            )
        except CrefineError as exc:
            failures.append((sample.id, str(exc)))
            out.append(sample)
            continue
        out.append(replace(sample, translated_constraints=constraints))
    return TranslationResult(
        dataset=DatasetFile(records=tuple(out), path=dataset.path),
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class BaselineComparison:
    without_constraints_pct: float
    with_constraints_pct: float
    failures: int


def baseline_compare(
    dataset: DatasetFile,
    config: RunConfig,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> BaselineComparison:
    """Mean compliance with the constraint block omitted vs included."""
    from .agents import GENERATOR_SAMPLING
    from .domain import ConstraintSet

    without: list[float] = []
    with_: list[float] = []
    failures = 0
    for sample in dataset.records:
        if sample.translated_constraints is None:
            raise ValidationError(f"sample {sample.id!r} is untranslated")
        try:
            system, user = build_bare_generation_prompt(
                sample.instruction, sample.user_input, templates
            )
            bare_responses = config.generator_backend.complete(
                ChatRequest(system, user, GENERATOR_SAMPLING, config.n_responses)
            )
            bare_report = judge_all(sample, bare_responses, config.agent_backend, templates)
            constraint_set = ConstraintSet(constraints=sample.translated_constraints)
            responses = generate(
                sample, constraint_set, config.generator_backend,
                config.n_responses, templates,
            )
            report = judge_all(sample, responses, config.agent_backend, templates)
        except CrefineError as exc:
            failures += 1
            log.warning("baseline comparison failed for %s: %s", sample.id, exc)
            continue
        without.append(bare_report.overall)
        with_.append(report.overall)
    if not without:
        raise ValidationError("no sample completed the baseline comparison")
    return BaselineComparison(
        without_constraints_pct=100.0 * sum(without) / len(without),
        with_constraints_pct=100.0 * sum(with_) / len(with_),
        failures=failures,
    )


@dataclass(frozen=True)
class RunStats:
    """The slice of a run the batch statistics need."""

    sample_id: str
    subset: SubsetLabel
    category: Category
    baseline_score: float | None
    final_score: float | None
    iterations_run: int
    chosen_actions: tuple[str, ...]
    failed: bool = False

    @property
    def delta(self) -> float:
        if self.baseline_score is None or self.final_score is None:
            return 0.0
        return self.final_score - self.baseline_score


def stats_from_outcome(sample: Sample, outcome: RunOutcome) -> RunStats:
    actions = tuple(
        record.candidates[record.chosen_index].constraint_set.lineage[-1].action.value
        for record in outcome.trace.history
    )
    return RunStats(
        sample_id=sample.id,
        subset=sample.subset_label,
        category=outcome.category,
        baseline_score=outcome.baseline_score,
        final_score=outcome.final_score,
        iterations_run=outcome.iterations_run,
        chosen_actions=actions,
        failed=outcome.error is not None,
    )


@dataclass(frozen=True)
class SubsetStats:
    n: int
    counts: dict[Category, int]
    avg_delta: float
    stdev_delta: float


@dataclass(frozen=True)
class BatchReport:
    """All batch-level statistics, derived purely from per-run stats."""

    n_samples: int
    counts: dict[Category, int]
    avg_delta_all: float
    avg_delta_improved: float
    per_subset: dict[SubsetLabel, SubsetStats]
    avg_iterations_by_category: dict[str, float]
    action_frequency_by_category: dict[str, dict[str, float]]
    failures: int
    per_sample: tuple[RunStats, ...]

    def _pct(self, category: Category) -> float:
        if not self.n_samples:
            return 0.0
        return 100.0 * self.counts[category] / self.n_samples

    @property
    def pct_already_compliant(self) -> float:
        return self._pct(Category.ALREADY_COMPLIANT)

    @property
    def pct_unchanged(self) -> float:
        return self._pct(Category.UNCHANGED_COMPLIANCE)

    @property
    def pct_increased(self) -> float:
        return self._pct(Category.INCREASED_COMPLIANCE)

    @classmethod
    def from_stats(cls, stats: list[RunStats] | tuple[RunStats, ...]) -> "BatchReport":
        rows = tuple(sorted(stats, key=lambda s: s.sample_id))
        counts = {c: 0 for c in Category}
        for row in rows:
            counts[row.category] += 1
        deltas = [row.delta for row in rows]
        improved = [row.delta for row in rows if row.category is Category.INCREASED_COMPLIANCE]
        per_subset: dict[SubsetLabel, SubsetStats] = {}
        for label in SubsetLabel:
            members = [r for r in rows if r.subset is label]
            sub_counts = {c: 0 for c in Category}
            for r in members:
                sub_counts[r.category] += 1
            sub_deltas = [r.delta for r in members]
            per_subset[label] = SubsetStats(
                n=len(members),
                counts=sub_counts,
                avg_delta=_mean(sub_deltas),
                stdev_delta=statistics.pstdev(sub_deltas) if len(sub_deltas) > 1 else 0.0,
            )
        groups: dict[str, list[RunStats]] = {"overall": list(rows)}
        for category in Category:
            groups[category.value] = [r for r in rows if r.category is category]
        avg_iterations = {
            name: _mean([r.iterations_run for r in members])
            for name, members in groups.items()
        }
        action_frequency = {}
        for name, members in groups.items():
            freq = {}
            for action in ACTION_NAMES:
                total = sum(r.chosen_actions.count(action) for r in members)
                freq[action] = total / len(members) if members else 0.0
            action_frequency[name] = freq
        return cls(
            n_samples=len(rows),
            counts=counts,
            avg_delta_all=_mean(deltas),
            avg_delta_improved=_mean(improved),
            per_subset=per_subset,
            avg_iterations_by_category=avg_iterations,
            action_frequency_by_category=action_frequency,
            failures=sum(1 for r in rows if r.failed),
            per_sample=rows,
        )


def _mean(values: list) -> float:
    return sum(values) / len(values) if values else 0.0


def run_batch(
    dataset: DatasetFile,
    config: RunConfig,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
    workers: int = 4,
    on_outcome=None,
) -> BatchReport:
    """Run the optimization loop over every sample with a bounded worker pool.

    ``on_outcome(sample, outcome_or_none, error_or_none)`` is invoked once
    per sample as results land (trace persistence hooks in here). Samples
    whose run raises are recorded as unchanged-compliance failures.
    """
    untranslated = dataset.pending_translation
    if untranslated:
        raise ValidationError(
            f"{len(untranslated)} samples lack translated constraints, "
            f"first: {untranslated[0]!r}"
        )

    def run_one(sample: Sample):
        return run(sample, config, templates)

    stats: list[RunStats] = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [(sample, pool.submit(run_one, sample)) for sample in dataset.records]
        for sample, future in futures:
            try:
                outcome = future.result()
            except Exception as exc:
                log.warning("run failed for sample %s: %s", sample.id, exc)
                stats.append(
                    RunStats(
                        sample_id=sample.id,
                        subset=sample.subset_label,
                        category=Category.UNCHANGED_COMPLIANCE,
                        baseline_score=None,
                        final_score=None,
                        iterations_run=0,
                        chosen_actions=(),
                        failed=True,
                    )
                )
                if on_outcome is not None:
                    on_outcome(sample, None, exc)
                continue
            stats.append(stats_from_outcome(sample, outcome))
            if on_outcome is not None:
                on_outcome(sample, outcome, None)
    return BatchReport.from_stats(stats)


def sweep_k(
    dataset: DatasetFile,
    config: RunConfig,
    ks: list[int],
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
    workers: int = 4,
) -> list[tuple[int, float]]:
    """pct_increased for each strategy count k, in the given order."""
    if not ks:
        raise ValidationError("ks is empty")
    rows = []
    for k in ks:
        report = run_batch(
            dataset, replace(config, k_strategies=k), templates, workers=workers
        )
        rows.append((k, report.pct_increased))
    return rows
