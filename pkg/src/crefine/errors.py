"""Exception hierarchy shared across the package."""


class CrefineError(Exception):
    """Base class for all package errors."""


class ValidationError(CrefineError):
    """A value violated a documented invariant or schema."""


class BackendError(CrefineError):
    """Base class for chat-backend failures."""


class BackendUnavailableError(BackendError):
    """Transport-level failure that persisted through all retries."""


class BackendRejectedError(BackendError):
    """The endpoint answered with a non-2xx status."""

    def __init__(self, status: int, body: str):
        super().__init__(f"backend rejected request: HTTP {status}: {body[:500]}")
        self.status = status
        self.body = body


class MalformedResponseError(BackendError):
    """The endpoint answered 2xx but the payload was unusable."""


class MockMisconfiguredError(BackendError):
    """No mock rule matched and no catch-all rule was configured."""


class AgentError(CrefineError):
    """Base class for agent-level failures (prompting, parsing)."""


class TranslationFailedError(AgentError):
    """Question-to-constraint translation produced an empty result."""


class JudgeParseError(AgentError):
    """Judge output could not be parsed as JSON after retries."""


class JudgeRangeError(AgentError):
    """Judge score was not an integer in [0, 10]."""


class JudgeAllError(AgentError):
    """A judge call failed while scoring a response grid."""

    def __init__(self, response_index: int, question_index: int, cause: Exception):
        super().__init__(
            f"judging failed at response {response_index}, "
            f"question {question_index}: {cause}"
        )
        self.response_index = response_index
        self.question_index = question_index
        self.cause = cause


class PlannerFailedError(AgentError):
    """No valid edit directive could be parsed from any planner completion."""


class EditFailedError(AgentError):
    """The editing agent did not return a usable constraint list."""
