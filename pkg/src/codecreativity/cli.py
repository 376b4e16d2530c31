"""Command-line interface.

Subcommands mirror the pipeline stages: ``augment`` (denial loop over a
dataset), ``evaluate`` (solve/judge/review every instance), ``score``
(reports from persisted records), plus ``detect`` (ad-hoc review of one
file) and ``validate`` (dataset lint).

Configuration precedence is deliberate: a JSON config file acts as a pinned
run manifest and overrides flags, which override built-in defaults.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 model error,
4 invariant violation in self-produced output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import dataset as ds
from . import pipeline, report
from .client import AuditLog, ModelError, ProviderConfig, load_stub_scripts, make_client_factory
from .dataset import DatasetError
from .detect import ParseError, detect_static, detect_with_model
from .metrics import EmptyState, MDeficient
from .report import InvariantViolation
from .sandbox import ResourceLimits, SandboxSetupError
from .taxonomy import sort_techniques

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MODEL = 3
EXIT_INVARIANT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; flags mirror these fields one to one."""

    dataset: str = ""
    humans: str = ""
    out_dir: str = "out"
    max_t: int = 5
    t_min: int = 0
    t_max: int | None = None
    workers: int = 4
    seed: int = 0
    detector: str = "static"
    k: int = 5
    misc_novelty: bool = True
    wall_time: float = 10.0
    memory_mb: int = 512
    stdout_cap_kb: int = 1024
    provider: str = "stub"
    model: str = "stub"
    endpoint: str = "https://api.openai.com/v1"
    credential_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 2048
    requests_per_minute: float = 60.0
    max_attempts: int = 3
    script: str = ""
    audit_log: str = ""

    def __post_init__(self) -> None:
        if self.max_t < 1:
            raise UsageError("max_t must be >= 1")
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        t_max = self.max_t if self.t_max is None else self.t_max
        if not 0 <= self.t_min <= t_max <= self.max_t:
            raise UsageError("state range must satisfy 0 <= t_min <= t_max <= max_t")
        if self.detector not in ("static", "model"):
            raise UsageError("detector must be 'static' or 'model'")

    @property
    def t_range(self) -> tuple[int, int]:
        return (self.t_min, self.max_t if self.t_max is None else self.t_max)

    @property
    def limits(self) -> ResourceLimits:
        return ResourceLimits(
            wall_time_per_test=self.wall_time,
            memory_bytes=self.memory_mb * 1024 * 1024,
            stdout_cap_bytes=self.stdout_cap_kb * 1024,
        )

    @property
    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            provider=self.provider,
            model=self.model,
            endpoint=self.endpoint,
            credential_env=self.credential_env,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            requests_per_minute=self.requests_per_minute,
            max_attempts=self.max_attempts,
        )


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def build_config(args: argparse.Namespace) -> RunConfig:
    """defaults < explicit flags < config file (the file pins the run)."""
    config = RunConfig()
    flag_values = {
        name: value
        for name, value in vars(args).items()
        if name in _CONFIG_FIELDS and value is not None
    }
    if flag_values:
        config = replace(config, **flag_values)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"could not read config file: {err}") from err
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        config = replace(config, **doc)
    return config


def _client_factory(config: RunConfig):
    audit = AuditLog(config.audit_log) if config.audit_log else None
    scripts = None
    if config.provider == "stub":
        if not config.script:
            raise UsageError("stub provider needs --script (or config 'script')")
        scripts = load_stub_scripts(config.script)
    return make_client_factory(
        config.provider_config, scripts=scripts, audit_log=audit
    )


def _load_problems_with_humans(config: RunConfig):
    problems, states = ds.load_dataset(config.dataset)
    if config.humans:
        humans = ds.load_human_solutions(config.humans)
        problems = [
            replace(p, human_solutions=tuple(humans.get(p.id, ()))) for p in problems
        ]
    return problems, states


def _print_state_counts(states) -> None:
    max_t = max((len(s.constraints) for s in states), default=0)
    counts = [len(ds.filter_state(states, t)) for t in range(max_t + 1)]
    header = "state (# of constraints)  " + "  ".join(f"{t:>5d}" for t in range(max_t + 1))
    values = "# of instances            " + "  ".join(f"{c:>5d}" for c in counts)
    print(header)
    print(values)


def cmd_augment(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not config.dataset:
        raise UsageError("augment needs --dataset")
    problems, _ = _load_problems_with_humans(config)
    factory = _client_factory(config)
    result = pipeline.augment_dataset(
        problems, factory, max_t=config.max_t, seed=config.seed,
        workers=config.workers,
    )
    out = Path(config.out_dir)
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    for trace in result.traces:
        ds.save_trace(traces_dir / f"{trace.problem_id}.json", trace)
    for problem_id, trace in result.partial_traces.items():
        ds.save_trace(traces_dir / f"{problem_id}.partial.json", trace)
    ds.save_dataset(
        out / "dataset.jsonl",
        [p for p in problems if p.id in result.states_by_problem],
        result.states_by_problem,
    )
    if result.failures:
        manifest = {
            "failed_problems": {
                pid: message for pid, message in sorted(result.failures.items())
            }
        }
        (out / "augment_failures.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )
    all_states = [s for states in result.states_by_problem.values() for s in states]
    _print_state_counts(all_states)
    print(f"augmented {len(result.traces)}/{len(problems)} problems -> {out}")
    if result.failures and not result.traces:
        raise ModelError("augmentation failed for every problem")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not config.dataset:
        raise UsageError("evaluate needs --dataset")
    problems, states = _load_problems_with_humans(config)
    factory = _client_factory(config)
    detector = pipeline.make_detector(
        config.detector,
        factory if config.detector == "model" else None,
    )
    records = pipeline.evaluate_dataset(
        problems, states, factory, detector,
        limits=config.limits, k=config.k, t_range=config.t_range,
        workers=config.workers,
    )
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds.save_records(out / "records.jsonl", records)
    profiles = pipeline.compute_human_profiles(problems, detector)
    ds.save_profiles(out / "human_profiles.jsonl", profiles)
    model_failures = [
        r for r in records
        if r.solution.error and r.solution.error.startswith("model_error")
    ]
    print(f"wrote {len(records)} records "
          f"({len(model_failures)} model failures) -> {out}")
    if records and len(model_failures) == len(records):
        raise ModelError("every instance failed with a model error")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = Path(config.out_dir)
    records_path = Path(args.records) if args.records else out / "records.jsonl"
    profiles_path = Path(args.profiles) if args.profiles else out / "human_profiles.jsonl"
    records = ds.load_records(records_path)
    profiles = ds.load_profiles(profiles_path)
    selected = report.select_for_scoring(
        records, profiles, misc_novelty=config.misc_novelty
    )
    score_report = report.build_report(
        selected, profiles, config.t_range, misc_novelty=config.misc_novelty
    )
    out.mkdir(parents=True, exist_ok=True)
    csv_text = report.report_to_csv(score_report)
    (out / "report.csv").write_text(csv_text, encoding="utf-8")
    (out / "report.json").write_text(
        json.dumps(report.report_to_json(score_report), sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )
    (out / "report.md").write_text(
        report.report_to_markdown(score_report), encoding="utf-8"
    )
    if config.dataset:
        _, states = ds.load_dataset(config.dataset)
        try:
            baseline = report.human_baseline_rows(
                profiles, states, config.t_range, misc_novelty=config.misc_novelty
            )
            (out / "human_baseline.csv").write_text(baseline, encoding="utf-8")
        except (MDeficient, EmptyState, KeyError) as err:
            log.warning("human baseline skipped: %s", err)
    print(report.report_to_markdown(score_report))
    report.validate_emitted_csv((out / "report.csv").read_text(encoding="utf-8"))
    print(f"reports -> {out}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    config = build_config(args)
    source = Path(args.file).read_text(encoding="utf-8")
    if config.detector == "model":
        factory = _client_factory(config)
        techniques = detect_with_model(source, factory("adhoc"))
    else:
        try:
            techniques = detect_static(source)
        except ParseError as err:
            raise DatasetError(f"{args.file}: {err}") from err
    for technique in sort_techniques(techniques):
        print(f"- {technique.prompt_string}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not config.dataset:
        raise UsageError("validate needs --dataset")
    problems, states = ds.load_dataset(config.dataset)
    messages = [f"{config.dataset}: {len(problems)} problems, {len(states)} states"]
    if config.humans:
        humans = ds.load_human_solutions(config.humans)
        orphans = sorted(set(humans) - {p.id for p in problems})
        if orphans:
            raise DatasetError(
                f"{config.humans}: human solutions for unknown problems: {orphans}"
            )
        messages.append(f"{config.humans}: solutions for {len(humans)} problems")
    _print_state_counts(states)
    for message in messages:
        print(message)
    print("ok")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run manifest (overrides flags)")
    parser.add_argument("--dataset", help="problems JSONL")
    parser.add_argument("--humans", help="human solutions JSONL")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")
    parser.add_argument("--max-t", dest="max_t", type=int, help="denial depth")
    parser.add_argument("--t-min", dest="t_min", type=int, help="first state scored")
    parser.add_argument("--t-max", dest="t_max", type=int, help="last state scored")
    parser.add_argument("--workers", type=int, help="parallel workers")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--detector", choices=("static", "model"),
                        help="technique detector backend")
    parser.add_argument("--k", type=int, help="samples per instance")
    parser.add_argument("--no-misc-novelty", dest="misc_novelty",
                        action="store_false", default=None,
                        help="do not count the catch-all technique as novel")
    parser.add_argument("--wall-time", dest="wall_time", type=float,
                        help="judge wall clock per test (seconds)")
    parser.add_argument("--memory-mb", dest="memory_mb", type=int,
                        help="judge address-space limit (MiB)")
    parser.add_argument("--stdout-cap-kb", dest="stdout_cap_kb", type=int,
                        help="judge stdout cap (KiB)")
    parser.add_argument("--provider", choices=("stub", "openai"), help="model provider")
    parser.add_argument("--model", help="model name")
    parser.add_argument("--endpoint", help="provider base URL")
    parser.add_argument("--credential-env", dest="credential_env",
                        help="env var holding the API key")
    parser.add_argument("--temperature", type=float, help="decoding temperature")
    parser.add_argument("--max-tokens", dest="max_tokens", type=int,
                        help="decoding token budget")
    parser.add_argument("--requests-per-minute", dest="requests_per_minute",
                        type=float, help="client rate limit")
    parser.add_argument("--max-attempts", dest="max_attempts", type=int,
                        help="retries per model call")
    parser.add_argument("--script", help="stub reply script (JSON)")
    parser.add_argument("--audit-log", dest="audit_log",
                        help="JSONL transcript destination")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="codecreativity",
                     description="Constraint-denial creativity harness")
    commands = parser.add_subparsers(dest="command", required=True)

    augment = commands.add_parser("augment", help="run the denial loop")
    _add_common(augment)
    augment.set_defaults(func=cmd_augment)

    evaluate = commands.add_parser("evaluate", help="solve, judge and review")
    _add_common(evaluate)
    evaluate.set_defaults(func=cmd_evaluate)

    score = commands.add_parser("score", help="reports from persisted records")
    _add_common(score)
    score.add_argument("--records", help="records JSONL (default: out/records.jsonl)")
    score.add_argument("--profiles",
                       help="human profiles JSONL (default: out/human_profiles.jsonl)")
    score.set_defaults(func=cmd_score)

    detect = commands.add_parser("detect", help="review one source file")
    _add_common(detect)
    detect.add_argument("file", help="source file to review")
    detect.set_defaults(func=cmd_detect)

    validate = commands.add_parser("validate", help="lint a dataset")
    _add_common(validate)
    validate.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, SandboxSetupError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as err:
        print(f"model error: {err}", file=sys.stderr)
        return EXIT_MODEL
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
