"""Wire format for the execution protocol.

Requests and responses travel as single-line JSON objects.  Parsing is
strict about shape and permissive about extra keys, so older clients can
talk to newer runners.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

VALID_STATUSES = ("pass", "fail", "error", "timeout")

DEFAULT_TIMEOUT_S = 5.0


class ProtocolError(ValueError):
    """Request rejected before execution; the connection stays usable."""


@dataclasses.dataclass(frozen=True)
class TestSpec:
    test_id: str
    line: str


@dataclasses.dataclass(frozen=True)
class ExecRequest:
    id: str
    program: str
    tests: tuple[TestSpec, ...]
    timeout_s: float = DEFAULT_TIMEOUT_S
    measure_coverage: bool = False


@dataclasses.dataclass(frozen=True)
class TestResult:
    test_id: str
    status: str
    message: str = ""


@dataclasses.dataclass(frozen=True)
class CoverageSummary:
    branch_covered: int
    branch_total: int

    @property
    def branch_pct(self) -> float:
        # a branchless program has nothing left uncovered
        if self.branch_total == 0:
            return 100.0
        return 100.0 * self.branch_covered / self.branch_total


@dataclasses.dataclass(frozen=True)
class ExecResponse:
    id: str
    results: tuple[TestResult, ...]
    coverage: Optional[CoverageSummary] = None


def _require(data, key, kinds, what):
    if key not in data:
        raise ProtocolError(f"{what} is missing required field {key!r}")
    value = data[key]
    if not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds) if isinstance(kinds, tuple) else kinds.__name__
        raise ProtocolError(f"{what} field {key!r} must be {names}")
    return value


def request_from_dict(data) -> ExecRequest:
    if not isinstance(data, dict):
        raise ProtocolError("request must be a JSON object")
    raw_id = _require(data, "id", (str, int), "request")
    program = _require(data, "program", (str,), "request")
    raw_tests = _require(data, "tests", (list,), "request")
    tests = []
    for i, entry in enumerate(raw_tests):
        if not isinstance(entry, dict):
            raise ProtocolError(f"request tests[{i}] must be an object")
        test_id = _require(entry, "test_id", (str, int), f"tests[{i}]")
        line = _require(entry, "line", (str,), f"tests[{i}]")
        tests.append(TestSpec(str(test_id), line))
    timeout_s = data.get("timeout_s", DEFAULT_TIMEOUT_S)
    if isinstance(timeout_s, bool) or not isinstance(timeout_s, (int, float)):
        raise ProtocolError("request field 'timeout_s' must be a number")
    if timeout_s <= 0:
        raise ProtocolError("request field 'timeout_s' must be positive")
    measure = data.get("measure_coverage", False)
    if not isinstance(measure, bool):
        raise ProtocolError("request field 'measure_coverage' must be a boolean")
    return ExecRequest(
        id=str(raw_id),
        program=program,
        tests=tuple(tests),
        timeout_s=float(timeout_s),
        measure_coverage=measure,
    )


def request_to_dict(request: ExecRequest) -> dict:
    return {
        "id": request.id,
        "program": request.program,
        "tests": [{"test_id": t.test_id, "line": t.line} for t in request.tests],
        "timeout_s": request.timeout_s,
        "measure_coverage": request.measure_coverage,
    }


def response_to_dict(response: ExecResponse) -> dict:
    data = {
        "id": response.id,
        "results": [
            {"test_id": r.test_id, "status": r.status, "message": r.message}
            for r in response.results
        ],
    }
    if response.coverage is not None:
        data["coverage"] = {
            "branch_covered": response.coverage.branch_covered,
            "branch_total": response.coverage.branch_total,
            "branch_pct": response.coverage.branch_pct,
        }
    return data


def response_from_dict(data) -> ExecResponse:
    if not isinstance(data, dict):
        raise ProtocolError("response must be a JSON object")
    raw_id = _require(data, "id", (str, int), "response")
    raw_results = _require(data, "results", (list,), "response")
    results = []
    for i, entry in enumerate(raw_results):
        if not isinstance(entry, dict):
            raise ProtocolError(f"response results[{i}] must be an object")
        status = _require(entry, "status", (str,), f"results[{i}]")
        if status not in VALID_STATUSES:
            raise ProtocolError(f"results[{i}] has unknown status {status!r}")
        results.append(
            TestResult(
                str(_require(entry, "test_id", (str, int), f"results[{i}]")),
                status,
                str(entry.get("message", "")),
            )
        )
    coverage = None
    if data.get("coverage") is not None:
        cov = data["coverage"]
        if not isinstance(cov, dict):
            raise ProtocolError("response field 'coverage' must be an object")
        coverage = CoverageSummary(
            int(_require(cov, "branch_covered", (int,), "coverage")),
            int(_require(cov, "branch_total", (int,), "coverage")),
        )
    return ExecResponse(str(raw_id), tuple(results), coverage)
