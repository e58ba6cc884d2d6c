"""Chat-completion backends: a live OpenAI-style HTTP client and a scripted mock.

Every agent speaks through the same ``complete(request) -> list[str]``
surface, so the whole workflow can run against either implementation.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

import requests

from .errors import (
    BackendRejectedError,
    BackendUnavailableError,
    MalformedResponseError,
    MockMisconfiguredError,
    ValidationError,
)


class SamplingMode(Enum):
    GREEDY = "greedy"
    NUCLEUS = "nucleus"


@dataclass(frozen=True)
class SamplingParams:
    """Decoding configuration. Greedy carries no temperature/top_p."""

    mode: SamplingMode
    temperature: float | None = None
    top_p: float | None = None

    def __post_init__(self):
        if self.mode is SamplingMode.GREEDY:
            if self.temperature is not None or self.top_p is not None:
                raise ValidationError("greedy sampling takes no temperature/top_p")
        else:
            if self.temperature is None or self.top_p is None:
                raise ValidationError("nucleus sampling requires temperature and top_p")
            if not 0 < self.top_p <= 1:
                raise ValidationError(f"top_p must be in (0, 1], got {self.top_p}")

    @classmethod
    def greedy(cls) -> "SamplingParams":
        return cls(mode=SamplingMode.GREEDY)

    @classmethod
    def nucleus(cls, temperature: float = 0.9, top_p: float = 0.95) -> "SamplingParams":
        return cls(mode=SamplingMode.NUCLEUS, temperature=temperature, top_p=top_p)


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    sampling: SamplingParams
    n_completions: int = 1

    def __post_init__(self):
        if self.n_completions < 1:
            raise ValidationError(
                f"n_completions must be >= 1, got {self.n_completions}"
            )

    @property
    def full_text(self) -> str:
        """System and user prompts joined, for substring-based mock routing."""
        return self.system_prompt + "\n" + self.user_prompt


@dataclass(frozen=True)
class BackendEndpoint:
    """Connection settings for one chat-completions service."""

    base_url: str
    model_name: str
    auth_token: str | None = None
    timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValidationError(f"timeout must be > 0, got {self.timeout}")
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be >= 0, got {self.max_retries}")


class Backend(Protocol):
    """Anything that can answer a ChatRequest with n completions."""

    def complete(self, request: ChatRequest) -> list[str]: ...

    def describe(self) -> dict: ...


# Matchers accept either a substring of the combined prompt text or a
# predicate over the full request; completions are a canned list or a
# deterministic function of the request.
Matcher = str | Callable[[ChatRequest], bool]
Completions = Sequence[str] | Callable[[ChatRequest], Sequence[str]]


@dataclass(frozen=True)
class MockRule:
    match: Matcher
    completions: Completions

    def matches(self, request: ChatRequest) -> bool:
        if callable(self.match):
            return bool(self.match(request))
        return self.match in request.full_text


CATCH_ALL = ""  # empty substring matches every prompt


class MockBackend:
    """Deterministic scripted backend: first matching rule wins.

    Output is a pure function of (request, rule table): canned completions
    are cycled per request when ``n_completions`` exceeds the list, so the
    mock behaves identically under any call order or interleaving.
    """

    def __init__(self, rules: Sequence[MockRule]):
        if not rules:
            raise MockMisconfiguredError("mock backend needs at least one rule")
        for rule in rules:
            if not callable(rule.completions) and not list(rule.completions):
                raise MockMisconfiguredError("mock rule has an empty completion list")
        self.rules = tuple(rules)

    def complete(self, request: ChatRequest) -> list[str]:
        for rule in self.rules:
            if rule.matches(request):
                canned = rule.completions
                if callable(canned):
                    canned = list(canned(request))
                if not canned:
                    raise MalformedResponseError("mock rule produced no completions")
                return [canned[i % len(canned)] for i in range(request.n_completions)]
        raise MockMisconfiguredError(
            "no mock rule matched and no catch-all rule was configured"
        )

    def describe(self) -> dict:
        return {"kind": "mock", "rules": len(self.rules)}


def mock_program(rules: Sequence[MockRule | tuple[Matcher, Completions]]) -> MockBackend:
    """Build a MockBackend from (matcher, completions) pairs."""
    built = [r if isinstance(r, MockRule) else MockRule(*r) for r in rules]
    return MockBackend(built)


class HttpBackend:
    """OpenAI-style ``POST {base_url}/chat/completions`` client.

    Retries transport failures and HTTP 429/5xx with exponential backoff
    (0.5s, 1s, 2s, ...); never mutates the request between retries. If a
    server rejects ``n > 1`` (or silently returns fewer choices), the
    missing completions are fetched through single-completion requests
    with the same sampling parameters.
    """

    def __init__(self, endpoint: BackendEndpoint, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self._sleep = sleep

    def describe(self) -> dict:
        return {
            "kind": "http",
            "base_url": self.endpoint.base_url,
            "model": self.endpoint.model_name,
        }

    def _body(self, request: ChatRequest) -> dict:
        body = {
            "model": self.endpoint.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "n": request.n_completions,
        }
        if request.sampling.mode is SamplingMode.NUCLEUS:
            body["temperature"] = request.sampling.temperature
            body["top_p"] = request.sampling.top_p
        return body

    def _post(self, body: dict) -> requests.Response:
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.endpoint.auth_token:
            headers["Authorization"] = f"Bearer {self.endpoint.auth_token}"
        last_exc: Exception | None = None
        response = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            try:
                response = requests.post(
                    url, json=body, headers=headers, timeout=self.endpoint.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_exc = None
                continue
            return response
        if last_exc is not None:
            raise BackendUnavailableError(
                f"transport failure after {self.endpoint.max_retries} retries: {last_exc}"
            ) from last_exc
        assert response is not None
        raise BackendRejectedError(response.status_code, response.text)

    def complete(self, request: ChatRequest) -> list[str]:
        response = self._post(self._body(request))
        if not response.ok:
            # Some servers reject multi-completion requests outright.
            if request.n_completions > 1 and 400 <= response.status_code < 500:
                return self._sequential(request)
            raise BackendRejectedError(response.status_code, response.text)
        completions = self._parse_choices(response)
        if len(completions) < request.n_completions:
            remainder = request.n_completions - len(completions)
            single = ChatRequest(
                system_prompt=request.system_prompt,
                user_prompt=request.user_prompt,
                sampling=request.sampling,
                n_completions=1,
            )
            for _ in range(remainder):
                completions.extend(self.complete(single))
        return completions[: request.n_completions]

    def _sequential(self, request: ChatRequest) -> list[str]:
        single = ChatRequest(
            system_prompt=request.system_prompt,
            user_prompt=request.user_prompt,
            sampling=request.sampling,
            n_completions=1,
        )
        out: list[str] = []
        for _ in range(request.n_completions):
            out.extend(self.complete(single))
        return out

    @staticmethod
    def _parse_choices(response: requests.Response) -> list[str]:
        try:
            payload = response.json()
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"response is not JSON: {exc}") from exc
        choices = payload.get("choices")
        if not isinstance(choices, list) or not choices:
            raise MalformedResponseError("response carries no choices")
        out = []
        for choice in choices:
            content = (choice.get("message") or {}).get("content")
            if not isinstance(content, str):
                raise MalformedResponseError("choice without message content")
            out.append(content)
        return out
