"""Core data types and score arithmetic shared by every other module.

All types are immutable after construction (frozen dataclasses over tuples),
so they can be shared freely between concurrent branch evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class SubsetLabel(Enum):
    EASY = "easy"
    HARD = "hard"
    UNLABELED = "unlabeled"


class EditAction(Enum):
    """The planner's closed vocabulary of editing tools."""

    REPHRASE = "rephrase"
    SPLIT = "split"
    MERGE = "merge"
    REORDER = "reorder"

    @classmethod
    def from_tool_name(cls, name: str) -> "EditAction":
        """Map a tool name to an action, case-insensitively."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown editing tool: {name!r}") from None


class TerminationReason(Enum):
    PERFECT_SCORE = "perfect_score"
    MAX_ITERATIONS = "max_iterations"
    PATIENCE_EXHAUSTED = "patience_exhausted"


@dataclass(frozen=True)
class EditDirective:
    """Planner output: which tool to apply and a free-text instruction."""

    action: EditAction
    how_to_edit: str

    def __post_init__(self):
        if not isinstance(self.action, EditAction):
            raise ValidationError(f"action must be an EditAction, got {self.action!r}")


@dataclass(frozen=True)
class Sample:
    """One dataset record: an instruction, optional input, and its rubric.

    ``decomposed_questions`` is the fixed judging rubric; when
    ``translated_constraints`` is present it pairs with the questions 1:1.
    """

    id: str
    instruction: str
    decomposed_questions: tuple[str, ...]
    user_input: str = ""
    translated_constraints: tuple[str, ...] | None = None
    subset_label: SubsetLabel = SubsetLabel.UNLABELED

    def __post_init__(self):
        if not self.decomposed_questions:
            raise ValidationError(f"sample {self.id!r}: decomposed_questions is empty")
        if self.translated_constraints is not None and len(
            self.translated_constraints
        ) != len(self.decomposed_questions):
            raise ValidationError(
                f"sample {self.id!r}: {len(self.translated_constraints)} constraints "
                f"for {len(self.decomposed_questions)} questions"
            )


@dataclass(frozen=True)
class ConstraintSet:
    """The ordered constraint list the workflow mutates.

    ``lineage`` holds the directives applied to reach this set; it is empty
    for the original formulation.
    """

    constraints: tuple[str, ...]
    lineage: tuple[EditDirective, ...] = ()

    def __post_init__(self):
        if not self.constraints:
            raise ValidationError("constraint set is empty")
        for i, c in enumerate(self.constraints):
            if not c.strip():
                raise ValidationError(f"constraint {i} is empty or whitespace-only")


@dataclass(frozen=True)
class ComplianceReport:
    """Normalized judge scores for one batch of responses.

    Rows are responses, columns are the evaluation questions. Normalized
    scores are exactly ``raw / 10``; ``overall`` is the mean of per-response
    means.
    """

    raw_judge_scores: tuple[tuple[int, ...], ...]
    normalized: tuple[tuple[float, ...], ...]
    per_response_mean: tuple[float, ...]
    overall: float
    judge_reasoning: tuple[tuple[str, ...], ...] = ()

    @property
    def n_responses(self) -> int:
        return len(self.raw_judge_scores)

    @property
    def n_questions(self) -> int:
        return len(self.raw_judge_scores[0])

    @property
    def per_question_mean(self) -> tuple[float, ...]:
        """Mean normalized score of each question column across responses."""
        rows = self.normalized
        return tuple(
            sum(row[j] for row in rows) / len(rows) for j in range(self.n_questions)
        )


@dataclass(frozen=True)
class Candidate:
    """One evaluated branch: an edited set, its responses, and their report."""

    constraint_set: ConstraintSet
    responses: tuple[str, ...]
    report: ComplianceReport


@dataclass(frozen=True)
class IterationRecord:
    """Trace of one refinement cycle: the K evaluated branches and the pick."""

    iteration_index: int
    directives: tuple[EditDirective, ...]
    candidates: tuple[Candidate, ...]
    chosen_index: int
    feedback_summary: str
    errors: tuple[str, ...] = ()


@dataclass(frozen=True)
class BaselineRecord:
    """Iteration 0: the original constraints, their responses, and report."""

    constraint_set: ConstraintSet
    responses: tuple[str, ...]
    report: ComplianceReport


@dataclass(frozen=True)
class WorkflowState:
    """Full trace of a finished (or aborted) refinement run."""

    iteration: int
    patience_used: int
    current_set: ConstraintSet
    best_set: ConstraintSet
    best_score: float
    baseline: BaselineRecord
    history: tuple[IterationRecord, ...] = ()
    terminated_reason: TerminationReason | None = None
    error: str | None = None


def normalize_score(raw: int) -> float:
    """Map a raw 0-10 judge score onto [0, 1]."""
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValidationError(f"raw score must be an integer, got {raw!r}")
    if not 0 <= raw <= 10:
        raise ValidationError(f"raw score out of range [0, 10]: {raw}")
    return raw / 10


def aggregate_report(
    raw: list[list[int]] | tuple[tuple[int, ...], ...],
    reasoning: list[list[str]] | tuple[tuple[str, ...], ...] | None = None,
) -> ComplianceReport:
    """Build a ComplianceReport from a rectangular raw score matrix.

    Raises ValidationError for an empty or ragged matrix, or for any
    out-of-range entry.
    """
    if not raw or not raw[0]:
        raise ValidationError("score matrix is empty")
    width = len(raw[0])
    for i, row in enumerate(raw):
        if len(row) != width:
            raise ValidationError(
                f"ragged score matrix: row {i} has {len(row)} entries, expected {width}"
            )
    normalized = tuple(tuple(normalize_score(v) for v in row) for row in raw)
    per_response_mean = tuple(sum(row) / len(row) for row in normalized)
    overall = sum(per_response_mean) / len(per_response_mean)
    return ComplianceReport(
        raw_judge_scores=tuple(tuple(row) for row in raw),
        normalized=normalized,
        per_response_mean=per_response_mean,
        overall=overall,
        judge_reasoning=tuple(tuple(r) for r in reasoning) if reasoning else (),
    )


def improvement_delta(current: ComplianceReport, previous: ComplianceReport) -> float:
    """Signed change of the overall compliance score."""
    return current.overall - previous.overall
