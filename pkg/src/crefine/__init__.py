"""crefine: iterative refinement of explicit prompt constraints.

The workflow decouples a prompt's task description from its constraint
list and rewrites only the constraints, guided by per-constraint judge
scores, through generate / judge / summarize / plan / edit cycles.
"""

from .backend import (
    Backend,
    BackendEndpoint,
    ChatRequest,
    HttpBackend,
    MockBackend,
    MockRule,
    SamplingParams,
    mock_program,
)
from .domain import (
    ComplianceReport,
    ConstraintSet,
    EditAction,
    EditDirective,
    Sample,
    SubsetLabel,
    TerminationReason,
    WorkflowState,
    aggregate_report,
    improvement_delta,
    normalize_score,
)
from .harness import (
    BatchReport,
    DatasetFile,
    baseline_compare,
    ingest,
    run_batch,
    sweep_k,
    translate_all,
)
from .orchestrator import Category, RunConfig, RunOutcome, run, select_best
from .prompts import AgentPromptTemplates, DEFAULT_TEMPLATES

__all__ = [
    "AgentPromptTemplates",
    "Backend",
    "BackendEndpoint",
    "BatchReport",
    "Category",
    "ChatRequest",
    "ComplianceReport",
    "ConstraintSet",
    "DatasetFile",
    "DEFAULT_TEMPLATES",
    "EditAction",
    "EditDirective",
    "HttpBackend",
    "MockBackend",
    "MockRule",
    "RunConfig",
    "RunOutcome",
    "Sample",
    "SamplingParams",
    "SubsetLabel",
    "TerminationReason",
    "WorkflowState",
    "aggregate_report",
    "baseline_compare",
    "improvement_delta",
    "ingest",
    "mock_program",
    "normalize_score",
    "run",
    "run_batch",
    "select_best",
    "sweep_k",
    "translate_all",
]

__version__ = "0.1.0"
