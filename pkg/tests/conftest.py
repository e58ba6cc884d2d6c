"""Shared fixtures: synthetic samples and scripted backends.

Mock routing keys off each agent's distinctive system-prompt opening, so a
single rule table can serve a whole workflow run.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import pytest

from crefine.backend import CATCH_ALL, MockRule, mock_program
from crefine.domain import Sample, SubsetLabel

GOLDENS = Path(__file__).parent / "goldens"
DATA = Path(__file__).parent / "data"

GENERATOR_MARK = "You are a writing assistant."
JUDGE_MARK = "fair and strict judge"
PLANNER_MARK = "expert prompt reviewer"
EDITOR_MARK = "expert prompt writer"
TRANSLATOR_MARK = "question rewriting agent"

_ROUND = re.compile(r"\[round (\d+)\]")
_QUESTION = re.compile(r"\nQ(\d+)\?")


def golden(name: str) -> str:
    return GOLDENS.joinpath(name).read_text(encoding="utf-8")


def make_sample(
    sample_id: str = "s1",
    nq: int = 2,
    user_input: str = "",
    subset: SubsetLabel = SubsetLabel.UNLABELED,
    translated: bool = True,
) -> Sample:
    questions = tuple(f"Q{j}?" for j in range(nq))
    constraints = tuple(f"Ensure {sample_id} requirement {j} is met." for j in range(nq))
    return Sample(
        id=sample_id,
        instruction=f"Write the {sample_id} piece.",
        decomposed_questions=questions,
        user_input=user_input,
        translated_constraints=constraints if translated else None,
        subset_label=subset,
    )


def judge_json(score, reasoning: str = "ok") -> str:
    return json.dumps({"reasoning": reasoning, "score": score})


def planner_json(tool: str = "rephrase", how: str = "tighten the wording") -> str:
    return json.dumps({"editing tool": tool, "how to edit": how})


def judge_rule(score, reasoning: str = "ok") -> MockRule:
    return MockRule(JUDGE_MARK, [judge_json(score, reasoning)])


def planner_rule(tool: str = "rephrase", how: str = "tighten the wording") -> MockRule:
    return MockRule(PLANNER_MARK, [planner_json(tool, how)])


def constraints_block(user_prompt: str) -> str:
    """The '-- ' list the planner/editor prompts carry."""
    return user_prompt.split("### Constraints ###\n", 1)[1].split(
        "\n\n### Instructions ###", 1
    )[0]


def editor_echo_rule() -> MockRule:
    """Editor that returns the given constraint list unchanged."""
    return MockRule(EDITOR_MARK, lambda req: [constraints_block(req.user_prompt)])


def editor_const_rule(*constraints: str) -> MockRule:
    return MockRule(EDITOR_MARK, ["\n".join(f"-- {c}" for c in constraints)])


def generator_rule(*drafts: str) -> MockRule:
    return MockRule(GENERATOR_MARK, list(drafts) or ["a plain draft"])


def workflow_backend(judge_score: int = 10, drafts: tuple[str, ...] = ("a plain draft",)):
    """Pure mock covering all five agents with constant behavior."""
    return mock_program(
        [
            judge_rule(judge_score),
            planner_rule(),
            editor_echo_rule(),
            MockRule(TRANSLATOR_MARK, ["Ensure the requirement is met."]),
            generator_rule(*drafts),
            MockRule(CATCH_ALL, ["unused"]),
        ]
    )


class ScriptedScoreBackend:
    """Backend whose judge scores follow a per-generation-round script.

    ``rounds[r][q]`` is the raw score judged for any response of generation
    round r against question index q (test samples name their questions
    "Q0?", "Q1?", ...). Round 0 is the baseline; each candidate evaluation
    consumes one further round. Rounds past the script repeat the last one.
    """

    def __init__(self, rounds: list[tuple[int, ...]]):
        self.rounds = [tuple(r) for r in rounds]
        self.generation_calls = 0

    def complete(self, request):
        system = request.system_prompt
        n = request.n_completions
        if system.startswith(GENERATOR_MARK):
            r = self.generation_calls
            self.generation_calls += 1
            return [f"draft {i} [round {r}]" for i in range(n)]
        if system.startswith("You are an expert writing coach"):
            r = int(_ROUND.search(request.user_prompt).group(1))
            q = int(_QUESTION.search(request.user_prompt).group(1))
            scores = self.rounds[min(r, len(self.rounds) - 1)]
            return [judge_json(scores[q], "scripted")] * n
        if system.startswith("You are an expert prompt reviewer"):
            return [planner_json()] * n
        if system.startswith("You are an expert prompt writer"):
            return [constraints_block(request.user_prompt)] * n
        if system.startswith("You are a question rewriting agent"):
            return ["Ensure the requirement is met."] * n
        return ["unused"] * n

    def describe(self) -> dict:
        return {"kind": "scripted"}


def overall_rounds(*overalls: float, nq: int = 2):
    """Translate overall targets into per-question raw score rows.

    Each overall must be representable as a mean of nq integer tenths,
    e.g. 0.75 with nq=2 becomes raw scores (10, 5).
    """
    rounds = []
    for overall in overalls:
        total = round(overall * 10 * nq)
        row = []
        remaining = total
        for j in range(nq):
            value = min(10, remaining)
            row.append(value)
            remaining -= value
        assert remaining == 0, f"overall {overall} not representable with nq={nq}"
        assert abs(sum(row) / (10 * nq) - overall) < 1e-12
        rounds.append(tuple(row))
    return rounds


@pytest.fixture
def sample():
    return make_sample()
