"""The refinement loop: baseline, K-way branch evaluation, selection, termination.

One run proceeds beam-width-1: each iteration plans K edit strategies,
evaluates each edited constraint set independently, and only the best
candidate survives into the next iteration. The loop stops on a perfect
score, after n_max iterations, or once p_max consecutive iterations fail
to strictly improve on the best score so far. If nothing ever beats the
baseline, the original constraints are returned unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

from .agents import apply_edit, generate, judge_all, plan, summarize_feedback
from .backend import Backend
from .domain import (
    BaselineRecord,
    Candidate,
    ComplianceReport,
    ConstraintSet,
    IterationRecord,
    Sample,
    TerminationReason,
    WorkflowState,
)
from .errors import AgentError, BackendError, ValidationError
from .prompts import AgentPromptTemplates, DEFAULT_TEMPLATES

log = logging.getLogger(__name__)


class Category(Enum):
    ALREADY_COMPLIANT = "already_compliant"
    UNCHANGED_COMPLIANCE = "unchanged_compliance"
    INCREASED_COMPLIANCE = "increased_compliance"


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one optimization run."""

    generator_backend: Backend
    agent_backend: Backend
    n_max: int = 5
    p_max: int = 2
    k_strategies: int = 3
    n_responses: int = 3
    ablate_scores: bool = False

    def __post_init__(self):
        if self.n_max < 1:
            raise ValidationError(f"n_max must be >= 1, got {self.n_max}")
        if self.p_max < 0:
            raise ValidationError(f"p_max must be >= 0, got {self.p_max}")
        if self.k_strategies < 1:
            raise ValidationError(f"k_strategies must be >= 1, got {self.k_strategies}")
        if self.n_responses < 1:
            raise ValidationError(f"n_responses must be >= 1, got {self.n_responses}")


@dataclass(frozen=True)
class RunOutcome:
    final_set: ConstraintSet
    final_score: float
    baseline_score: float
    category: Category
    iterations_run: int
    trace: WorkflowState
    error: str | None = None


def select_best(candidates: list[tuple[ConstraintSet, ComplianceReport]]) -> int:
    """Index of the highest overall score; ties go to the lowest index."""
    if not candidates:
        raise ValidationError("no candidates to select from")
    best = 0
    for i in range(1, len(candidates)):
        if candidates[i][1].overall > candidates[best][1].overall:
            best = i
    return best


def run(
    sample: Sample,
    config: RunConfig,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> RunOutcome:
    """Optimize one sample's constraint list until a termination condition."""
    if sample.translated_constraints is None:
        raise ValidationError(
            f"sample {sample.id!r} has no translated constraints; translate first"
        )
    original = ConstraintSet(constraints=sample.translated_constraints)

    baseline_responses = tuple(
        generate(sample, original, config.generator_backend, config.n_responses, templates)
    )
    baseline_report = judge_all(sample, baseline_responses, config.agent_backend, templates)
    baseline = BaselineRecord(original, baseline_responses, baseline_report)

    best_set, best_score = original, baseline_report.overall
    history: list[IterationRecord] = []
    patience_used = 0
    terminated: TerminationReason | None = None
    error: str | None = None
    current_set = original
    current_report = baseline_report
    previous_report: ComplianceReport | None = None
    response_history = list(baseline_responses)

    if baseline_report.overall == 1.0:
        terminated = TerminationReason.PERFECT_SCORE
    else:
        for iteration in range(1, config.n_max + 1):
            feedback = summarize_feedback(
                current_report,
                previous_report,
                current_set,
                response_history,
                current_set.lineage,
                templates,
                include_scores=not config.ablate_scores,
            )
            try:
                directives = plan(
                    feedback, current_set, config.agent_backend, config.k_strategies, templates
                )
            except (AgentError, BackendError) as exc:
                error = f"iteration {iteration}: planning failed: {exc}"
                break

            candidates: list[Candidate] = []
            candidate_errors: list[str] = []
            for d_index, directive in enumerate(directives):
                try:
                    edited = apply_edit(current_set, directive, config.agent_backend, templates)
                    responses = tuple(
                        generate(
                            sample, edited, config.generator_backend,
                            config.n_responses, templates,
                        )
                    )
                    report = judge_all(sample, responses, config.agent_backend, templates)
                except (AgentError, BackendError) as exc:
                    candidate_errors.append(f"candidate {d_index}: {exc}")
                    continue
                candidates.append(Candidate(edited, responses, report))
            if not candidates:
                error = (
                    f"iteration {iteration}: no candidate survived: "
                    + "; ".join(candidate_errors)
                )
                break

            chosen = select_best([(c.constraint_set, c.report) for c in candidates])
            history.append(
                IterationRecord(
                    iteration_index=iteration,
                    directives=tuple(directives),
                    candidates=tuple(candidates),
                    chosen_index=chosen,
                    feedback_summary=feedback,
                    errors=tuple(candidate_errors),
                )
            )
            winner = candidates[chosen]
            previous_report, current_report = current_report, winner.report
            current_set = winner.constraint_set
            response_history.extend(winner.responses)

            if winner.report.overall == 1.0:
                best_set, best_score = winner.constraint_set, winner.report.overall
                terminated = TerminationReason.PERFECT_SCORE
                break
            if winner.report.overall > best_score:
                best_set, best_score = winner.constraint_set, winner.report.overall
                patience_used = 0
            else:
                patience_used += 1
                if patience_used >= config.p_max:
                    terminated = TerminationReason.PATIENCE_EXHAUSTED
                    break
        else:
            terminated = TerminationReason.MAX_ITERATIONS

    if error is not None:
        log.warning("run aborted for sample %s: %s", sample.id, error)

    state = WorkflowState(
        iteration=len(history),
        patience_used=patience_used,
        current_set=current_set,
        best_set=best_set,
        best_score=best_score,
        baseline=baseline,
        history=tuple(history),
        terminated_reason=terminated,
        error=error,
    )

    final_set, final_score = best_set, best_score
    if best_score <= baseline_report.overall:
        final_set, final_score = original, baseline_report.overall
    if baseline_report.overall == 1.0 and not history:
        category = Category.ALREADY_COMPLIANT
    elif final_score > baseline_report.overall:
        category = Category.INCREASED_COMPLIANCE
    else:
        category = Category.UNCHANGED_COMPLIANCE
    return RunOutcome(
        final_set=final_set,
        final_score=final_score,
        baseline_score=baseline_report.overall,
        category=category,
        iterations_run=len(history),
        trace=state,
        error=error,
    )
