"""The five agent behaviors: translate, generate, judge, summarize, plan, edit.

Each operation assembles a prompt from the shared templates, calls the
backend, and parses the completion. Agents are stateless request/response
steps; any number of them may run concurrently against the same backend.

Judging always uses the sample's original decomposed questions, never the
edited constraints. That rubric stability is what makes compliance scores
comparable across iterations.
"""

from __future__ import annotations

import json
import re

from .backend import Backend, ChatRequest, SamplingParams
from .domain import (
    ComplianceReport,
    ConstraintSet,
    EditAction,
    EditDirective,
    Sample,
    aggregate_report,
)
from .errors import (
    EditFailedError,
    JudgeAllError,
    JudgeParseError,
    JudgeRangeError,
    PlannerFailedError,
    TranslationFailedError,
    ValidationError,
)
from .prompts import (
    AgentPromptTemplates,
    DEFAULT_TEMPLATES,
    build_generation_prompt,
    build_translation_prompt,
    fill,
    render_constraint_list,
    resolve_conditional_input,
    split_roles,
)

# Re-sampling budget for malformed agent output before giving up.
MALFORMED_RETRIES = 2

GENERATOR_SAMPLING = SamplingParams.nucleus(temperature=0.9, top_p=0.95)
PLANNER_SAMPLING = SamplingParams.nucleus(temperature=0.9, top_p=0.95)

_LIST_MARKER = re.compile(r"^\s*(?:--\s*|-\s*|\*\s*|\d+[.)]\s*)")


def extract_json_object(text: str) -> dict | None:
    """Parse a bare JSON object, or the first balanced {...} block in prose."""
    stripped = text.strip()
    try:
        obj = json.loads(stripped)
        if isinstance(obj, dict):
            return obj
    except json.JSONDecodeError:
        pass
    for start in range(len(text)):
        if text[start] != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for end in range(start, len(text)):
            ch = text[end]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start : end + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        # fall through: this opening brace led nowhere, try the next one
    return None


def translate_question(
    question: str,
    backend: Backend,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> str:
    """Rewrite an evaluation question as an affirmative constraint."""
    if not question.strip():
        raise ValidationError("question is empty")
    system, user = build_translation_prompt(question, templates)
    completion = backend.complete(
        ChatRequest(system, user, SamplingParams.greedy(), 1)
    )[0].strip()
    if not completion:
        raise TranslationFailedError(f"empty translation for question: {question!r}")
    return completion


def assemble_prompt(
    sample: Sample,
    constraint_set: ConstraintSet,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> tuple[str, str]:
    """(system, user) texts for the generator under the given constraints."""
    return build_generation_prompt(
        sample.instruction, constraint_set.constraints, sample.user_input, templates
    )


def generate(
    sample: Sample,
    constraint_set: ConstraintSet,
    backend: Backend,
    n: int = 3,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> list[str]:
    """Draft n responses to the assembled prompt in one sampled request."""
    system, user = assemble_prompt(sample, constraint_set, templates)
    return backend.complete(ChatRequest(system, user, GENERATOR_SAMPLING, n))


def _judge_prompt(
    sample: Sample,
    response: str,
    question: str,
    templates: AgentPromptTemplates,
) -> tuple[str, str]:
    include_input = bool(sample.user_input.strip())
    template = resolve_conditional_input(templates.evaluator_template, include_input)
    filled = fill(
        template,
        {
            "Task Description": sample.instruction,
            "User Input": sample.user_input,
            "Response": response,
            "Decomposed Question": question,
        },
    )
    return split_roles(filled)


def judge(
    sample: Sample,
    response: str,
    question: str,
    backend: Backend,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> tuple[int, str]:
    """Score one response against one evaluation question.

    Returns (raw 0-10 score, reasoning). Unparseable judge output is
    re-sampled up to MALFORMED_RETRIES times before raising.
    """
    system, user = _judge_prompt(sample, response, question, templates)
    request = ChatRequest(system, user, SamplingParams.greedy(), 1)
    last = ""
    for _ in range(MALFORMED_RETRIES + 1):
        last = backend.complete(request)[0]
        parsed = extract_json_object(last)
        if parsed is None or "score" not in parsed:
            continue
        score = parsed["score"]
        if isinstance(score, float) and score.is_integer():
            score = int(score)
        if isinstance(score, bool) or not isinstance(score, int):
            raise JudgeRangeError(f"judge score is not an integer: {parsed['score']!r}")
        if not 0 <= score <= 10:
            raise JudgeRangeError(f"judge score out of range [0, 10]: {score}")
        reasoning = parsed.get("reasoning", "")
        return score, reasoning if isinstance(reasoning, str) else str(reasoning)
    raise JudgeParseError(f"unparseable judge output after retries: {last[:200]!r}")


def judge_all(
    sample: Sample,
    responses: list[str] | tuple[str, ...],
    backend: Backend,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> ComplianceReport:
    """Judge every response against every original decomposed question."""
    if not responses:
        raise ValidationError("no responses to judge")
    raw: list[list[int]] = []
    reasoning: list[list[str]] = []
    for i, response in enumerate(responses):
        raw_row: list[int] = []
        reason_row: list[str] = []
        for j, question in enumerate(sample.decomposed_questions):
            try:
                score, why = judge(sample, response, question, backend, templates)
            except Exception as exc:
                raise JudgeAllError(i, j, exc) from exc
            raw_row.append(score)
            reason_row.append(why)
        raw.append(raw_row)
        reasoning.append(reason_row)
    return aggregate_report(raw, reasoning)


def _direction(current: float, previous: float) -> str:
    if current > previous:
        return "increased"
    if current < previous:
        return "decreased"
    return "unchanged"


def summarize_feedback(
    current: ComplianceReport,
    previous: ComplianceReport | None,
    constraint_set: ConstraintSet,
    response_history: list[str] | tuple[str, ...],
    edit_history: tuple[EditDirective, ...],
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
    include_scores: bool = True,
) -> str:
    """Verbalize the score movement plus the response and edit histories.

    Score lines follow the report's question columns; each cites the
    constraint at the same position when the current set still aligns with
    the rubric, or a positional label after a split/merge changed the count.
    With ``include_scores`` false (the quantitative-feedback ablation) the
    score lines are omitted entirely and only the histories remain.
    """
    sections: list[str] = []
    if include_scores:
        lines = []
        current_means = current.per_question_mean
        previous_means = previous.per_question_mean if previous else None
        for j, mean in enumerate(current_means):
            prev = 0.0
            if previous_means is not None and j < len(previous_means):
                prev = previous_means[j]
            label = (
                constraint_set.constraints[j]
                if j < len(constraint_set.constraints)
                else f"#{j + 1}"
            )
            lines.append(
                templates.feedback_constraint_line.format(
                    label, mean, _direction(mean, prev), prev, abs(mean - prev)
                )
            )
        prev_overall = previous.overall if previous else 0.0
        lines.append(
            templates.feedback_average_line.format(
                current.overall,
                _direction(current.overall, prev_overall),
                prev_overall,
                abs(current.overall - prev_overall),
            )
        )
        sections.append("\n".join(lines))

    responses = "\n".join(
        f"[Response {i}]\n{text}" for i, text in enumerate(response_history, 1)
    )
    sections.append("### Response History ###\n" + (responses or "(none)"))
    edits = "\n".join(
        f"[Edit {i}] {d.action.value}: {d.how_to_edit}"
        for i, d in enumerate(edit_history, 1)
    )
    sections.append("### Edit History ###\n" + (edits or "(none)"))
    return "\n\n".join(sections)


def _parse_directive(text: str) -> EditDirective | None:
    obj = extract_json_object(text)
    if obj is None:
        return None
    tool = obj.get("editing tool")
    how = obj.get("how to edit")
    if not isinstance(tool, str) or not isinstance(how, str):
        return None
    try:
        action = EditAction.from_tool_name(tool)
    except ValidationError:
        return None
    return EditDirective(action=action, how_to_edit=how)


def plan(
    feedback: str,
    constraint_set: ConstraintSet,
    backend: Backend,
    k: int = 3,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> list[EditDirective]:
    """Sample k editing strategies from the planner.

    Malformed completions are re-sampled individually up to
    MALFORMED_RETRIES times and dropped afterwards; if nothing valid
    remains, the planner has failed.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    filled = fill(
        templates.planner_template,
        {
            "history": feedback,
            "constraints": render_constraint_list(constraint_set.constraints),
        },
    )
    system, user = split_roles(filled)
    completions = backend.complete(ChatRequest(system, user, PLANNER_SAMPLING, k))
    retry_request = ChatRequest(system, user, PLANNER_SAMPLING, 1)
    directives: list[EditDirective] = []
    for completion in completions:
        directive = _parse_directive(completion)
        for _ in range(MALFORMED_RETRIES):
            if directive is not None:
                break
            directive = _parse_directive(backend.complete(retry_request)[0])
        if directive is not None:
            directives.append(directive)
    if not directives:
        raise PlannerFailedError(f"no valid directive in {len(completions)} completions")
    return directives


def _parse_constraint_list(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        item = _LIST_MARKER.sub("", line, count=1).strip()
        if item:
            items.append(item)
    return items


def apply_edit(
    constraint_set: ConstraintSet,
    directive: EditDirective,
    backend: Backend,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> ConstraintSet:
    """Have the editing agent rewrite the list per the directive."""
    suggestion = (
        f"editing tool: {directive.action.value}\nhow to edit: {directive.how_to_edit}"
    )
    filled = fill(
        templates.editor_template,
        {
            "suggestion": suggestion,
            "constraints": render_constraint_list(constraint_set.constraints),
        },
    )
    system, user = split_roles(filled)
    request = ChatRequest(system, user, SamplingParams.greedy(), 1)
    completion = ""
    for _ in range(MALFORMED_RETRIES + 1):
        completion = backend.complete(request)[0]
        items = _parse_constraint_list(completion)
        if items:
            return ConstraintSet(
                constraints=tuple(items),
                lineage=constraint_set.lineage + (directive,),
            )
    raise EditFailedError(f"editor returned no constraints: {completion[:200]!r}")
