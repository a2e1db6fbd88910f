"""Run configuration: defaults, YAML file loading, and flag overrides.

Precedence is defaults, then the config file, then command-line flags.
Credentials never appear here; the provider reads its API key from the
environment variable named by ``api_key_env`` at call time.
"""

from __future__ import annotations

import dataclasses
import re
from typing import Optional

import yaml

from .benchio import DEFAULT_FIELD_MAP
from .errors import ConfigError
from .model import MRTarget, mr_from_code

COMMANDS = ("mutate", "gen", "testgen", "ablate", "report")
ALL_MR_CODES = tuple(f"MR{i}" for i in range(1, 10))


@dataclasses.dataclass
class RunConfig:
    """Everything a pipeline command needs, resolved and ready to run."""

    dataset: Optional[str] = None
    field_map: dict = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_FIELD_MAP)
    )
    dataset_label: str = ""
    out: str = "out"
    provider: str = "openai"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o-mini"
    replay_dir: Optional[str] = None
    record_dir: Optional[str] = None
    mrs: tuple = ALL_MR_CODES
    samples: int = 5
    similarity_threshold: float = 0.8
    max_iterations: int = 3
    sandbox_command: Optional[tuple] = None
    parallelism: int = 1
    seed: Optional[int] = None
    timeout_s: float = 5.0
    language: str = "French"
    baseline: bool = False

    @property
    def api_key_env(self) -> str:
        return re.sub(r"[^A-Z0-9]", "_", self.provider.upper()) + "_API_KEY"

    def mr_kinds(self) -> tuple:
        return tuple(mr_from_code(code) for code in self.mrs)


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def normalize_mrs(value) -> tuple:
    """Accept "5,6", ["MR5", 6], etc.; normalize to catalog codes."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"mrs must be a list or comma string, got {value!r}")
    if not parts:
        raise ConfigError("mrs must name at least one metamorphic relation")
    return tuple(mr_from_code(part).code for part in parts)


def load_config_file(path: str) -> dict:
    """Read one YAML mapping of RunConfig fields."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    return data


def build_config(file_values: Optional[dict] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Merge defaults, config-file values, and flag overrides in order."""
    values: dict = {}
    for source in (file_values or {}, overrides or {}):
        unknown = sorted(set(source) - _FIELD_NAMES)
        if unknown:
            raise ConfigError(
                *(f"unknown config key {key!r}" for key in unknown)
            )
        values.update(source)
    if "mrs" in values:
        values["mrs"] = normalize_mrs(values["mrs"])
    if "sandbox_command" in values and values["sandbox_command"] is not None:
        command = values["sandbox_command"]
        if isinstance(command, str):
            command = command.split()
        values["sandbox_command"] = tuple(str(part) for part in command)
    if "field_map" in values:
        mapping = values["field_map"]
        if not isinstance(mapping, dict):
            raise ConfigError("field_map must be a mapping")
        merged = dict(DEFAULT_FIELD_MAP)
        merged.update({str(k): str(v) for k, v in mapping.items()})
        values["field_map"] = merged
    return RunConfig(**values)


def validate_config(config: RunConfig, command: str) -> None:
    """Check the command's invariants; raise ConfigError with every issue."""
    problems = []
    if command not in COMMANDS:
        problems.append(f"unknown command {command!r}")
    if not 0.0 < config.similarity_threshold <= 1.0:
        problems.append(
            f"similarity_threshold must be in (0, 1], got {config.similarity_threshold}"
        )
    if config.samples < 1:
        problems.append(f"samples must be at least 1, got {config.samples}")
    if config.max_iterations < 1:
        problems.append(
            f"max_iterations must be at least 1, got {config.max_iterations}"
        )
    if config.parallelism < 1:
        problems.append(f"parallelism must be at least 1, got {config.parallelism}")
    if config.timeout_s <= 0:
        problems.append(f"timeout_s must be positive, got {config.timeout_s}")
    if config.replay_dir and config.record_dir:
        problems.append("--replay and --record are mutually exclusive")
    if command != "report" and not config.dataset:
        problems.append(f"{command} needs --dataset")
    try:
        kinds = config.mr_kinds()
    except ConfigError as exc:
        kinds = ()
        problems.append(str(exc))
    if kinds:
        if command in ("mutate", "gen", "ablate") and not any(
            mr.target is MRTarget.DESCRIPTION for mr in kinds
        ):
            problems.append(f"{command} needs at least one description MR (MR1-MR4)")
        if command == "testgen" and not any(
            mr.target is MRTarget.TEST_CASE for mr in kinds
        ):
            problems.append("testgen needs at least one test-case MR (MR5-MR9)")
    if problems:
        raise ConfigError(*problems)
