"""Command-line entry point.

Subcommands: mutate, gen, testgen, ablate, report.  Settings resolve in
three layers: built-in defaults, then a YAML config file (--config),
then explicit flags.  Exit codes are 0 for success, 1 for pipeline
failures, and 2 for configuration problems.

Credentials never appear on the command line or in config files; the
live provider reads them from the environment variable named by the
provider (for example OPENAI_API_KEY).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import COMMANDS, RunConfig, build_config, load_config_file, validate_config
from .errors import (
    ConfigError,
    DomainError,
    EmptyMutation,
    EmptyText,
    MissingMetric,
    NoCodeFound,
    ParseError,
    ProviderError,
    RenderError,
    SandboxError,
    SchemaError,
    TemplateError,
)
from .pipeline import run_ablate, run_gen, run_mutate, run_report, run_testgen

_PIPELINES = {
    "mutate": run_mutate,
    "gen": run_gen,
    "testgen": run_testgen,
    "ablate": run_ablate,
    "report": run_report,
}

_PIPELINE_FAILURES = (
    ParseError,
    RenderError,
    DomainError,
    TemplateError,
    NoCodeFound,
    EmptyMutation,
    EmptyText,
    ProviderError,
    SandboxError,
    SchemaError,
    MissingMetric,
    OSError,
)

_COMMAND_HELP = {
    "mutate": "rewrite task descriptions under each MR and gate them",
    "gen": "generate and evaluate Base and CMA candidate pools",
    "testgen": "expand oracle test suites with test-case MRs",
    "ablate": "score Base, each description MR alone, and the full pool",
    "report": "render tables from an existing run ledger",
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--dataset", help="line-delimited JSON task file")
    shared.add_argument(
        "--config", dest="config_file", help="YAML file with run settings"
    )
    shared.add_argument("--out", help="output directory for the run ledger")
    shared.add_argument("--seed", type=int, help="base seed for sampling order")
    shared.add_argument("--parallelism", type=int, help="worker thread count")
    shared.add_argument(
        "--replay", dest="replay_dir", help="serve LLM responses from this store"
    )
    shared.add_argument(
        "--record", dest="record_dir", help="record live LLM responses here"
    )
    shared.add_argument("--provider", help="LLM provider name")
    shared.add_argument("--model", help="model identifier")
    shared.add_argument("--mrs", help="comma-separated MR codes, e.g. 1,2,3,4")
    shared.add_argument("--samples", type=int, help="candidates per description")
    shared.add_argument(
        "--threshold",
        dest="similarity_threshold",
        type=float,
        help="semantic-review acceptance threshold in (0, 1]",
    )
    shared.add_argument(
        "--max-iters",
        dest="max_iterations",
        type=int,
        help="rewrite attempts before a mutation is abandoned",
    )
    shared.add_argument(
        "--baseline",
        action="store_const",
        const=True,
        help="also generate tests from the unmodified description (testgen)",
    )

    parser = argparse.ArgumentParser(
        prog="metamorph",
        description="Metamorphic-relation guided mutation, generation, and scoring.",
        epilog=(
            "API keys are read from <PROVIDER>_API_KEY in the environment; "
            "they cannot be passed as flags or config values."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        commands.add_parser(command, parents=[shared], help=_COMMAND_HELP[command])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config_file") and value is not None
    }
    file_values = load_config_file(args.config_file) if args.config_file else {}
    return build_config(file_values, overrides)


def dispatch(command: str, config: RunConfig) -> int:
    """Run one subcommand; translate failures into process exit codes."""
    try:
        validate_config(config, command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        _PIPELINES[command](config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _PIPELINE_FAILURES as exc:
        print(f"{command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
