"""Prompt templates for the five agents, plus rendering helpers.

The template texts are load-bearing: the test suite pins them byte-for-byte
against golden files, so edit them only together with the goldens. Slots use
``{name}`` markers and are substituted in a single pass (never recursively),
because several templates contain literal braces of their own.

Role-tagged templates hold both halves of a chat request; ``split_roles``
separates them. The ``% if User Input is not None:`` / ``% endif`` lines in
the evaluator template delimit a block that is dropped when the sample
carries no input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

TRANSLATE_QUESTION_TEMPLATE = (
    "You are a question rewriting agent, you will receive a question from the user "
    "and convert it to a constraint that instructs to respect the given question. "
    "For example, if you receive a question like 'Is the generated text a post title?' "
    "you should respond with its instructional translation which is "
    "'Ensure the generated text is a post title.'\n"
    "Question: {q}"
)

GENERATION_TEMPLATE = """\
> System: You are a writing assistant. {Instruction}
Ensure your draft complies with all of the following requirements: {Translated Constraints}
-- Return only the output required by the task and nothing else.
> User: {User Input}"""

EVALUATOR_TEMPLATE = """\
> System:
You are an expert writing coach acting as a fair and strict judge. Your task is to evaluate a given passage based on a provided rubric.
> User:
### Description ###
{Task Description}
% if User Input is not None:
### Input ###
{User Input}
% endif
### Passage ###
{Response}
### Rubric ###
Evaluate the given passage on the following criterion on a scale of 0 to 10:
{Decomposed Question} (0 = completely disagree, 2 = somewhat disagree, 5 = neutral, 8 = somewhat agree, 10 = completely agree).
### Instructions ###
Provide your output only in a JSON format with the keys "reasoning" and "score"."""

FEEDBACK_CONSTRAINT_LINE = (
    'The compliance score for the constraint "{}" is {:.2f}, '
    "{} from the last compliance score {:.2f} by {:.2f}."
)

FEEDBACK_AVERAGE_LINE = (
    "The average compliance score over all the constraints is {:.2f}, "
    "{} from the last average compliance score {:.2f} by {:.2f}."
)

PLANNER_TEMPLATE = """\
> System:
You are an expert prompt reviewer for large language models. You have the access to an editing history and editing tools. Your task is to suggest the best tool to edit the given list of constraints such that the average compliance score can be maximized. You should understand what has and has not worked by reviewing available edits in the given history.
> User:
### Editing History ###
{history}

### Editing Tools ###
{
  "rephrase": "change the wording of one constraint to improve its clarity and specificity, without changing the original meaning. This tool is particularly indicated for constraints that have low compliance scores and do not contain examples of how to be executed or are not clearly described in an actionable way.",

  "split": "divide a long constraint into multiple short ones to improve its clarity and specificity, without changing the original meaning. This tool is particularly indicated for constraints that are too long and involve multiple actions and have low compliance scores.",

  "merge": "combine multiple short constraints into a long one to improve its clarity and specificity, without changing the original meaning.This tool is particularly indicated for constraints that are related or overlapping with each other and both have low compliance scores.",

  "reorder": "switch the order of one constraint with the other, without changing the original meaning. This tool is the default whenever the other tools are unlikely to further improve the compliance score of the constraint."
}

### Constraints ###
{constraints}

### Instructions ###
Provide your output only in a JSON format with the keys "editing tool" and "how to edit"."""

EDITOR_TEMPLATE = """\
> System:
You are an expert prompt writer for large language models. You are given an editing suggestion and a list of constraints. Your task is to strictly follow the editing suggestion and rewrite the list of constraints.
> User:
### Editing Suggestion ###
{suggestion}

### Constraints ###
{constraints}

### Instructions ###
Provide your output in the same list format of the given constraints without a title."""


@dataclass(frozen=True)
class AgentPromptTemplates:
    translator_question_to_constraint: str = TRANSLATE_QUESTION_TEMPLATE
    generation_template: str = GENERATION_TEMPLATE
    evaluator_template: str = EVALUATOR_TEMPLATE
    feedback_constraint_line: str = FEEDBACK_CONSTRAINT_LINE
    feedback_average_line: str = FEEDBACK_AVERAGE_LINE
    planner_template: str = PLANNER_TEMPLATE
    editor_template: str = EDITOR_TEMPLATE


DEFAULT_TEMPLATES = AgentPromptTemplates()

_COND_BLOCK = re.compile(
    r"% if User Input is not None:\n(.*?)% endif\n", flags=re.DOTALL
)


def fill(template: str, slots: dict[str, str]) -> str:
    """Substitute ``{name}`` slots in one pass, leaving other braces alone."""
    pattern = re.compile("|".join(re.escape("{" + k + "}") for k in slots))
    return pattern.sub(lambda m: slots[m.group(0)[1:-1]], template)


def split_roles(template: str) -> tuple[str, str]:
    """Split a role-tagged template into (system, user) texts."""
    head, sep, tail = template.partition("\n> User:")
    if not sep:
        raise ValueError("template has no '> User:' section")
    system = head.removeprefix("> System:").removeprefix("\n").removeprefix(" ")
    user = tail.removeprefix("\n") if tail.startswith("\n") else tail.removeprefix(" ")
    return system, user


def render_with_roles(system: str, user: str) -> str:
    """Render a (system, user) pair in the role-tagged layout of the logs."""
    return f"> System:\n{system}\n> User: {user}"


def render_constraint_list(constraints: tuple[str, ...] | list[str]) -> str:
    """Render constraints in the list shape the prompts use: one per line."""
    return "\n".join(f"-- {c}" for c in constraints)


def resolve_conditional_input(template: str, include: bool) -> str:
    """Keep or drop the optional-input block of the evaluator template."""
    return _COND_BLOCK.sub(lambda m: m.group(1) if include else "", template)


def build_translation_prompt(question: str, templates: AgentPromptTemplates = DEFAULT_TEMPLATES) -> tuple[str, str]:
    """Chat halves for the question-to-constraint rewriting agent.

    The template's final line carries the question; everything above it is
    the agent description and becomes the system prompt.
    """
    head, _, last = templates.translator_question_to_constraint.rpartition("\n")
    return head, fill(last, {"q": question})


def build_generation_prompt(
    instruction: str,
    constraints: tuple[str, ...] | list[str],
    user_input: str,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> tuple[str, str]:
    """Chat halves for the generator, with the rendered constraint block."""
    system_t, user_t = _split_generation_template(templates.generation_template)
    system = fill(
        system_t,
        {
            "Instruction": instruction,
            "Translated Constraints": "\n" + render_constraint_list(constraints),
        },
    )
    return system, fill(user_t, {"User Input": user_input})


def build_bare_generation_prompt(
    instruction: str,
    user_input: str,
    templates: AgentPromptTemplates = DEFAULT_TEMPLATES,
) -> tuple[str, str]:
    """Generator prompt without any constraint block (baseline comparison)."""
    system_t, user_t = _split_generation_template(templates.generation_template)
    preamble = system_t.partition("\nEnsure your draft complies")[0]
    return fill(preamble, {"Instruction": instruction}), fill(
        user_t, {"User Input": user_input}
    )


def _split_generation_template(template: str) -> tuple[str, str]:
    head, sep, tail = template.partition("\n> User: ")
    if not sep:
        raise ValueError("generation template has no '> User: ' section")
    return head.removeprefix("> System: "), tail
