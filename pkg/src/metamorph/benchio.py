"""Benchmark file loading, the append-only run ledger, and report tables.

Ledger timestamps are logical sequence numbers rather than wall-clock
times, so two runs over identical inputs produce byte-identical files.
Report aggregation is a pure function of ledger content; improvement
columns are always recomputed, never stored.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import pathlib
from typing import Optional, Union

from .errors import MissingMetric, SchemaError
from .gateway import usage_summary
from .model import Task, payload_of

DEFAULT_FIELD_MAP = {
    "id": "task_id",
    "description": "prompt",
    "entry_point": "entry_point",
    "solution": "canonical_solution",
    "tests": "test",
}


@dataclasses.dataclass(frozen=True)
class DatasetFile:
    """A line-delimited JSON benchmark file plus its field-name mapping.

    Published benchmarks disagree on JSON keys, so the mapping from Task
    fields to record keys is data, not code.
    """

    path: str
    field_map: dict = dataclasses.field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))
    dataset: str = ""

    def label(self) -> str:
        return self.dataset or pathlib.Path(self.path).stem


@dataclasses.dataclass(frozen=True)
class LedgerRecord:
    kind: str
    run_id: str
    timestamp: int
    payload: dict


def _record_id(record: dict, mapping: dict, line_no: int) -> str:
    key = mapping.get("id", "task_id")
    value = record.get(key) if isinstance(record, dict) else None
    return str(value) if value is not None else f"line {line_no}"


def _split_tests(value, rid: str, key: str) -> tuple[str, ...]:
    if isinstance(value, str):
        lines = value.splitlines()
    elif isinstance(value, list):
        lines = [str(item) for item in value]
    else:
        raise SchemaError(f"record {rid}: field {key!r} must be a string or a list")
    tests = tuple(
        line.strip() for line in lines if line.strip().startswith("assert")
    )
    if not tests:
        raise SchemaError(f"record {rid}: field {key!r} contains no assert lines")
    return tests


def load_tasks(file: Union[DatasetFile, str, pathlib.Path]) -> list[Task]:
    """Read one benchmark file into Tasks, in file order."""
    if not isinstance(file, DatasetFile):
        file = DatasetFile(str(file))
    mapping = file.field_map
    tasks: list[Task] = []
    seen: set[str] = set()
    with open(file.path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: not valid JSON ({exc})") from None
            if not isinstance(record, dict):
                raise SchemaError(f"line {line_no}: record is not a JSON object")
            rid = _record_id(record, mapping, line_no)
            fields = {}
            for field in ("id", "description", "entry_point", "solution", "tests"):
                key = mapping.get(field, field)
                if key not in record:
                    raise SchemaError(f"record {rid}: missing field {key!r}")
                fields[field] = record[key]
            task_id = str(fields["id"])
            if task_id in seen:
                raise SchemaError(f"record {task_id}: duplicate id")
            seen.add(task_id)
            description = fields["description"]
            if not isinstance(description, str) or not description.strip():
                raise SchemaError(
                    f"record {rid}: field {mapping['description']!r} must be "
                    "a non-empty string"
                )
            entry_point = fields["entry_point"]
            if not isinstance(entry_point, str) or not entry_point:
                raise SchemaError(
                    f"record {rid}: field {mapping['entry_point']!r} must be "
                    "a non-empty string"
                )
            tasks.append(
                Task(
                    id=task_id,
                    description=description,
                    entry_point=entry_point,
                    oracle_solution=str(fields["solution"]),
                    oracle_tests=_split_tests(
                        fields["tests"], rid, mapping["tests"]
                    ),
                    dataset=file.label(),
                )
            )
    return tasks


class Ledger:
    """Append-only, line-delimited JSON record store for one run."""

    def __init__(self, path, run_id: str):
        self.path = pathlib.Path(path)
        self.run_id = run_id
        self._next = 0
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                self._next = sum(1 for line in handle if line.strip())

    def append(self, kind: str, payload: dict) -> LedgerRecord:
        record = LedgerRecord(kind, self.run_id, self._next, dict(payload))
        line = json.dumps(
            {
                "kind": record.kind,
                "run_id": record.run_id,
                "timestamp": record.timestamp,
                "payload": record.payload,
            }
        )
        # One write call per line keeps concurrent appends intact.
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
        self._next += 1
        return record

    def records(self) -> list[LedgerRecord]:
        return read_ledger(self.path)


def append_ledger(ledger: Ledger, record) -> LedgerRecord:
    """Append a core-model object or a (kind, payload) pair."""
    if isinstance(record, tuple):
        kind, payload = record
    else:
        kind, payload = payload_of(record)
    return ledger.append(kind, payload)


def read_ledger(path) -> list[LedgerRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                records.append(
                    LedgerRecord(
                        kind=data["kind"],
                        run_id=data["run_id"],
                        timestamp=data["timestamp"],
                        payload=data["payload"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SchemaError(
                    f"ledger line {line_no}: malformed record ({exc})"
                ) from None
    return records


def derive_run_id(command: str, seed: Optional[int]) -> str:
    return f"{command}-seed{seed if seed is not None else 'none'}"


class ReportLayout(enum.Enum):
    PASS_TABLE = "pass"
    COVERAGE_TABLE = "coverage"
    CORRECTNESS_TABLE = "correctness"
    ABLATION_TABLE = "ablation"
    TOKEN_TABLE = "tokens"


@dataclasses.dataclass(frozen=True)
class TableReport:
    layout: ReportLayout
    text: str
    csv: str


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _fmt_delta(value: float) -> str:
    return f"{value:+.6g}"


def _as_records(ledger) -> list[LedgerRecord]:
    if isinstance(ledger, Ledger):
        return ledger.records()
    return list(ledger)


def _series_metrics(records) -> dict[str, dict]:
    series: dict[str, dict] = {}
    for record in records:
        if record.kind == "run_metrics":
            series[record.payload.get("series", "base")] = record.payload
    return series


def _rows_pass(records) -> list[list[str]]:
    series = _series_metrics(records)
    for name in ("base", "cma"):
        if name not in series:
            raise MissingMetric(f"run_metrics/{name}")
    rows = [["Metric", "Base", "CMA", "Improvement"]]
    for key, label in (("pass_at_1", "Pass@1"), ("pass_at_5", "Pass@5")):
        base = series["base"][key] * 100
        cma = series["cma"][key] * 100
        rows.append([label, _fmt(base), _fmt(cma), _fmt_delta(cma - base)])
    return rows


def _rows_coverage(records) -> list[list[str]]:
    by_series: dict[str, list[float]] = {}
    for record in records:
        if record.kind == "coverage":
            name = record.payload.get("series", "base")
            by_series.setdefault(name, []).append(record.payload["branch_pct"])
    for name in ("base", "cma"):
        if not by_series.get(name):
            raise MissingMetric(f"coverage/{name}")
    base = sum(by_series["base"]) / len(by_series["base"])
    cma = sum(by_series["cma"]) / len(by_series["cma"])
    return [
        ["Metric", "Base", "CMA", "Improvement"],
        ["Branch coverage", _fmt(base), _fmt(cma), _fmt_delta(cma - base)],
    ]


def _rows_correctness(records) -> list[list[str]]:
    counts: dict[str, dict[str, int]] = {}
    for record in records:
        if record.kind != "test_variant":
            continue
        status = record.payload.get("status")
        if status not in ("valid", "invalid"):
            continue
        name = record.payload.get("series", "cma")
        bucket = counts.setdefault(name, {"valid": 0, "invalid": 0})
        bucket[status] += 1
    if not counts:
        raise MissingMetric("test_variant")
    display = {"base": "Base", "cma": "CMA"}
    rows = [["Series", "Valid", "Judged", "Correctness"]]
    for name in sorted(counts):
        valid = counts[name]["valid"]
        judged = valid + counts[name]["invalid"]
        rows.append(
            [
                display.get(name, name),
                str(valid),
                str(judged),
                _fmt(100.0 * valid / judged),
            ]
        )
    return rows


def _rows_ablation(records) -> list[list[str]]:
    points: dict[str, dict] = {}
    for record in records:
        if record.kind == "ablation_point":
            # Re-assignment keeps the label's first-seen position.
            points[record.payload["label"]] = record.payload
    if "Base" not in points:
        raise MissingMetric("ablation_point/Base")
    base_p1 = points["Base"]["pass_at_1"]
    rows = [["Point", "Pass@1", "Pass@5", "Improvement"]]
    for label, payload in points.items():
        rows.append(
            [
                label,
                _fmt(payload["pass_at_1"] * 100),
                _fmt(payload["pass_at_5"] * 100),
                _fmt_delta((payload["pass_at_1"] - base_p1) * 100),
            ]
        )
    return rows


def _rows_tokens(records) -> list[list[str]]:
    view = [{"kind": r.kind, "payload": r.payload} for r in records]
    summary = usage_summary(view)
    if not summary:
        raise MissingMetric("llm_usage")
    rows = [["Module", "Problems", "Requests", "Prompt", "Completion"]]
    for module in sorted(summary):
        usage = summary[module]
        rows.append(
            [
                module,
                str(usage.problem_count),
                str(usage.request_count),
                _fmt(usage.avg_prompt),
                _fmt(usage.avg_completion),
            ]
        )
    return rows


_LAYOUT_RENDERERS = {
    ReportLayout.PASS_TABLE: _rows_pass,
    ReportLayout.COVERAGE_TABLE: _rows_coverage,
    ReportLayout.CORRECTNESS_TABLE: _rows_correctness,
    ReportLayout.ABLATION_TABLE: _rows_ablation,
    ReportLayout.TOKEN_TABLE: _rows_tokens,
}


def emit_report(ledger, layout) -> TableReport:
    """Aggregate one ledger into a report table, as text and CSV."""
    layout = ReportLayout(layout)
    rows = _LAYOUT_RENDERERS[layout](_as_records(ledger))
    text = "\n".join(" & ".join(row) for row in rows)
    buffer = io.StringIO()
    csv.writer(buffer).writerows(rows)
    return TableReport(layout=layout, text=text, csv=buffer.getvalue())
