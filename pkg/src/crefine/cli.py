"""Command-line surface: translate, optimize, report.

Exit codes: 0 success, 1 partial failure, 2 usage or I/O error. Tables go
to stdout; diagnostics go to stderr via logging, so stdout stays pipeable.

The config file is a single JSON document naming the two endpoints (the
generator model and the model shared by all other agents), the loop knobs,
and the worker count. Auth tokens never live in the file: an endpoint names
the environment variable holding its token.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .backend import Backend, BackendEndpoint, HttpBackend, MockRule, mock_program
from .errors import CrefineError, ValidationError
from .harness import BatchReport, DatasetFile, ingest, translate_all, write_dataset
from .orchestrator import RunConfig
from .report import render_report, report_to_dict
from .traces import append_trace, build_error_trace, build_trace, read_traces, stats_from_trace

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class MockRuleSpec:
    match: str
    completions: tuple[str, ...]


@dataclass(frozen=True)
class EndpointSpec:
    """Declarative endpoint description as it appears in the config file."""

    kind: str  # "http" | "mock"
    base_url: str = ""
    model: str = ""
    auth_token_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    rules: tuple[MockRuleSpec, ...] = ()

    def __post_init__(self):
        if self.kind not in ("http", "mock"):
            raise ValidationError(f"endpoint kind must be http or mock, got {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ValidationError("http endpoint requires base_url")
        if self.kind == "mock" and not self.rules:
            raise ValidationError("mock endpoint requires rules")

    @classmethod
    def from_dict(cls, data: dict) -> "EndpointSpec":
        rules = tuple(
            MockRuleSpec(match=r["match"], completions=tuple(r["completions"]))
            for r in data.get("rules", ())
        )
        return cls(
            kind=data.get("kind", "http"),
            base_url=data.get("base_url", ""),
            model=data.get("model", ""),
            auth_token_env=data.get("auth_token_env"),
            timeout=float(data.get("timeout", 60.0)),
            max_retries=int(data.get("max_retries", 3)),
            rules=rules,
        )

    def to_dict(self) -> dict:
        if self.kind == "mock":
            return {
                "kind": "mock",
                "rules": [
                    {"match": r.match, "completions": list(r.completions)}
                    for r in self.rules
                ],
            }
        data = {
            "kind": "http",
            "base_url": self.base_url,
            "model": self.model,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
        }
        if self.auth_token_env:
            data["auth_token_env"] = self.auth_token_env
        return data

    def build(self) -> Backend:
        if self.kind == "mock":
            return mock_program(
                [MockRule(r.match, r.completions) for r in self.rules]
            )
        token = os.environ.get(self.auth_token_env) if self.auth_token_env else None
        return HttpBackend(
            BackendEndpoint(
                base_url=self.base_url,
                model_name=self.model,
                auth_token=token,
                timeout=self.timeout,
                max_retries=self.max_retries,
            )
        )


@dataclass(frozen=True)
class ExperimentConfig:
    generator: EndpointSpec
    agents: EndpointSpec
    n_max: int = 5
    p_max: int = 2
    k_strategies: int = 3
    n_responses: int = 3
    ablate_scores: bool = False
    workers: int = 4
    deterministic: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        for key in ("generator", "agents"):
            if key not in data:
                raise ValidationError(f"config missing {key!r} endpoint")
        return cls(
            generator=EndpointSpec.from_dict(data["generator"]),
            agents=EndpointSpec.from_dict(data["agents"]),
            n_max=int(data.get("n_max", 5)),
            p_max=int(data.get("p_max", 2)),
            k_strategies=int(data.get("k_strategies", 3)),
            n_responses=int(data.get("n_responses", 3)),
            ablate_scores=bool(data.get("ablate_scores", False)),
            workers=int(data.get("workers", 4)),
            deterministic=bool(data.get("deterministic", False)),
        )

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "agents": self.agents.to_dict(),
            "n_max": self.n_max,
            "p_max": self.p_max,
            "k_strategies": self.k_strategies,
            "n_responses": self.n_responses,
            "ablate_scores": self.ablate_scores,
            "workers": self.workers,
            "deterministic": self.deterministic,
        }

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def run_config(self, ablate_scores: bool | None = None, k: int | None = None) -> RunConfig:
        return RunConfig(
            generator_backend=self.generator.build(),
            agent_backend=self.agents.build(),
            n_max=self.n_max,
            p_max=self.p_max,
            k_strategies=self.k_strategies if k is None else k,
            n_responses=self.n_responses,
            ablate_scores=self.ablate_scores if ablate_scores is None else ablate_scores,
        )

    def now(self) -> str:
        if self.deterministic:
            return FIXED_TIMESTAMP
        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _load_dataset(path: str) -> DatasetFile:
    if not Path(path).exists():
        raise FileNotFoundError(path)
    return ingest(path)


def cmd_translate(args: argparse.Namespace) -> int:
    try:
        dataset = _load_dataset(args.dataset)
    except FileNotFoundError:
        log.error("dataset file not found: %s", args.dataset)
        return EXIT_USAGE
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_USAGE

    failures: tuple[tuple[str, str], ...] = ()
    if dataset.pending_translation:
        if not args.endpoint:
            log.error(
                "%d samples need translation but no --endpoint config was given",
                len(dataset.pending_translation),
            )
            return EXIT_USAGE
        try:
            config = ExperimentConfig.load(args.endpoint)
        except (OSError, ValueError, ValidationError) as exc:
            log.error("cannot load endpoint config %s: %s", args.endpoint, exc)
            return EXIT_USAGE
        result = translate_all(dataset, config.agents.build())
        dataset, failures = result.dataset, result.failures
        for sample_id, message in failures:
            log.warning("translation failed for %s: %s", sample_id, message)
    write_dataset(dataset, args.out)
    log.info("wrote %d records to %s", len(dataset.records), args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    try:
        dataset = _load_dataset(args.dataset)
        config = ExperimentConfig.load(args.config)
    except FileNotFoundError as exc:
        log.error("file not found: %s", exc)
        return EXIT_USAGE
    except (ValidationError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE

    if args.sample is not None:
        records = tuple(s for s in dataset.records if s.id == args.sample)
        if not records:
            log.error("sample id not found in dataset: %s", args.sample)
            return EXIT_USAGE
        dataset = DatasetFile(records=records, path=dataset.path)

    run_config = config.run_config(
        ablate_scores=True if args.ablate_scores else None,
        k=args.k,
    )
    agent_backend = run_config.agent_backend

    if dataset.pending_translation:
        log.info("translating %d samples first", len(dataset.pending_translation))
        result = translate_all(dataset, agent_backend)
        dataset = result.dataset
        for sample_id, message in result.failures:
            log.warning("translation failed for %s: %s", sample_id, message)
        dataset = DatasetFile(
            records=tuple(
                s for s in dataset.records if s.translated_constraints is not None
            ),
            path=dataset.path,
        )

    trace_dir = Path(args.traces)
    trace_dir.mkdir(parents=True, exist_ok=True)
    completed = 0

    def persist(sample, outcome, exc):
        nonlocal completed
        now = config.now()
        if outcome is not None:
            trace = build_trace(sample, run_config, outcome, started=now, finished=now)
            completed += 1
        else:
            trace = build_error_trace(sample, run_config, str(exc), started=now, finished=now)
        append_trace(trace_dir, trace)

    from .harness import run_batch

    if dataset.records:
        run_batch(dataset, run_config, workers=config.workers, on_outcome=persist)
    else:
        log.warning("no samples to optimize")

    # Recompute the summary from the persisted traces so the printed report
    # is guaranteed to match a later `report` invocation over the same dir.
    records, _ = read_traces(trace_dir)
    batch = BatchReport.from_stats([stats_from_trace(t) for t in records])
    with open(trace_dir / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(report_to_dict(batch), handle, indent=2, sort_keys=True)
        handle.write("\n")
    sys.stdout.write(render_report(batch))
    if dataset.records and completed == 0:
        log.error("no sample completed")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    trace_dir = Path(args.traces)
    if not trace_dir.is_dir():
        log.error("trace directory not found: %s", args.traces)
        return EXIT_USAGE
    records, skipped = read_traces(trace_dir)
    if skipped:
        log.warning("skipped %d corrupt trace lines", skipped)
    batch = BatchReport.from_stats([stats_from_trace(t) for t in records])
    sys.stdout.write(
        render_report(batch, by_subset=args.by_subset, actions=args.actions)
    )
    if args.json:
        with open(args.json, "w", encoding="utf-8") as handle:
            json.dump(report_to_dict(batch), handle, indent=2, sort_keys=True)
            handle.write("\n")
    if args.figures:
        from .figures import save_report_figures

        for path in save_report_figures(batch, args.figures):
            log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crefine",
        description="Iteratively rewrite prompt constraints to maximize judged compliance.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_translate = sub.add_parser(
        "translate", help="rewrite decomposed questions as affirmative constraints"
    )
    p_translate.add_argument("--dataset", required=True, help="input JSONL dataset")
    p_translate.add_argument("--out", required=True, help="output JSONL path")
    p_translate.add_argument("--endpoint", help="config file naming the agents endpoint")
    p_translate.set_defaults(func=cmd_translate)

    p_optimize = sub.add_parser("optimize", help="run the refinement loop over a dataset")
    p_optimize.add_argument("--dataset", required=True, help="input JSONL dataset")
    p_optimize.add_argument("--config", required=True, help="experiment config JSON")
    p_optimize.add_argument("--traces", required=True, help="directory for trace files")
    p_optimize.add_argument("--sample", help="optimize only this sample id")
    p_optimize.add_argument(
        "--ablate-scores", action="store_true",
        help="omit quantitative score lines from planner feedback",
    )
    p_optimize.add_argument("--k", type=int, help="override the strategy count")
    p_optimize.set_defaults(func=cmd_optimize)

    p_report = sub.add_parser("report", help="recompute statistics from trace files")
    p_report.add_argument("--traces", required=True, help="directory with trace files")
    p_report.add_argument("--by-subset", action="store_true", help="add the subset table")
    p_report.add_argument("--actions", action="store_true", help="add the action table")
    p_report.add_argument("--json", help="also write the report as JSON to this path")
    p_report.add_argument("--figures", help="also render figures as PNGs into this directory")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CrefineError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
