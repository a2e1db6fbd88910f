"""Shared domain types used by every pipeline stage.

All types here are immutable value objects, freely shareable across
concurrent workers, and each one round-trips through the line-delimited
JSON run-ledger format via payload_of / from_payload.
"""

from __future__ import annotations

import dataclasses
import enum

from .errors import ConfigError
from .testcases import AssertionCase, case_from_payload, case_to_payload


class MRTarget(enum.Enum):
    DESCRIPTION = "description"
    TEST_CASE = "test_case"


@dataclasses.dataclass(frozen=True)
class MRKind:
    code: str
    target: MRTarget
    name: str


MR1 = MRKind("MR1", MRTarget.DESCRIPTION, "Negation")
MR2 = MRKind("MR2", MRTarget.DESCRIPTION, "Translation")
MR3 = MRKind("MR3", MRTarget.DESCRIPTION, "Stepwise Redefinition")
MR4 = MRKind("MR4", MRTarget.DESCRIPTION, "Paraphrasing")
MR5 = MRKind("MR5", MRTarget.TEST_CASE, "Variable Swapping")
MR6 = MRKind("MR6", MRTarget.TEST_CASE, "Input Permutation")
MR7 = MRKind("MR7", MRTarget.TEST_CASE, "Algebraic Distributive Transformation")
MR8 = MRKind("MR8", MRTarget.TEST_CASE, "Domain Subset")
MR9 = MRKind("MR9", MRTarget.TEST_CASE, "Incremental Data")

MR_CATALOG: dict[str, MRKind] = {
    mr.code: mr for mr in (MR1, MR2, MR3, MR4, MR5, MR6, MR7, MR8, MR9)
}

DESCRIPTION_MRS = (MR1, MR2, MR3, MR4)
TEST_CASE_MRS = (MR5, MR6, MR7, MR8, MR9)


def mr_from_code(code) -> MRKind:
    """Resolve "MR5", "5", or 5 to the catalog entry."""
    text = str(code).strip().upper()
    if not text.startswith("MR"):
        text = f"MR{text}"
    try:
        return MR_CATALOG[text]
    except KeyError:
        raise ConfigError(f"unknown metamorphic relation {code!r}") from None


class VariantStatus(enum.Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EXHAUSTED = "exhausted"


class TestStatus(enum.Enum):
    PENDING = "pending"
    VALID = "valid"
    INVALID = "invalid"
    DUPLICATE = "duplicate"


class ExpectedState(enum.Enum):
    AS_TRANSFORMED = "as_transformed"
    PENDING_ORACLE = "pending_oracle"
    ORACLE_FILLED = "oracle_filled"


class VariantSource(enum.Enum):
    RULE_BASED = "rule_based"
    LLM_BASED = "llm_based"


@dataclasses.dataclass(frozen=True)
class Task:
    """One benchmark problem."""

    id: str
    description: str
    entry_point: str
    oracle_solution: str
    oracle_tests: tuple[str, ...]
    dataset: str = "custom"

    def __post_init__(self):
        if not self.id:
            raise ValueError("task id must be non-empty")
        if not self.entry_point:
            raise ValueError("task entry_point must be non-empty")
        object.__setattr__(self, "oracle_tests", tuple(self.oracle_tests))


@dataclasses.dataclass(frozen=True)
class DescriptionVariant:
    """An MR-transformed problem description with its review outcome."""

    task_id: str
    mr: MRKind
    text: str
    similarity: float | None
    status: VariantStatus
    attempt: int


@dataclasses.dataclass(frozen=True)
class TestVariant:
    """An MR-transformed test case with validation state and provenance."""

    origin_index: int
    mr: MRKind
    case: AssertionCase
    expected_state: ExpectedState
    status: TestStatus
    source: VariantSource
    rule: str | None = None
    reason: str | None = None


@dataclasses.dataclass(frozen=True)
class Origin:
    """Which candidate pool a solution belongs to: Base, one MR, or CMA."""

    kind: str
    mr: MRKind | None = None

    def __post_init__(self):
        if self.kind not in ("base", "mr", "cma"):
            raise ValueError(f"unknown origin kind {self.kind!r}")
        if self.kind == "mr" and self.mr is None:
            raise ValueError("single-MR origin needs an MRKind")
        if self.kind != "mr" and self.mr is not None:
            raise ValueError(f"{self.kind} origin must not carry an MRKind")

    @property
    def label(self) -> str:
        if self.kind == "base":
            return "Base"
        if self.kind == "cma":
            return "CMA"
        return self.mr.code

    @staticmethod
    def base() -> Origin:
        return Origin("base")

    @staticmethod
    def cma() -> Origin:
        return Origin("cma")

    @staticmethod
    def single(mr: MRKind) -> Origin:
        return Origin("mr", mr)


@dataclasses.dataclass(frozen=True)
class CandidateSolution:
    """One generated solution sample."""

    task_id: str
    origin: Origin
    sample_index: int
    source_code: str
    raw_response_id: str | None = None
    extraction: str = "fenced"


@dataclasses.dataclass(frozen=True)
class RunMetrics:
    """Aggregated metrics for one run configuration."""

    pass_at_1: float
    pass_at_5: float
    branch_coverage_pct: float
    correctness_rate_pct: float
    tokens_in: int
    tokens_out: int


def pass_upper_bound_check(metrics: RunMetrics) -> bool:
    """Sanity gate over aggregated metrics; true iff all invariants hold."""
    return (
        0.0 <= metrics.pass_at_1 <= metrics.pass_at_5 <= 1.0
        and 0.0 <= metrics.branch_coverage_pct <= 100.0
        and 0.0 <= metrics.correctness_rate_pct <= 100.0
        and metrics.tokens_in >= 0
        and metrics.tokens_out >= 0
    )


def _origin_to_payload(origin: Origin) -> dict:
    return {"kind": origin.kind, "mr": origin.mr.code if origin.mr else None}


def _origin_from_payload(payload: dict) -> Origin:
    mr = MR_CATALOG[payload["mr"]] if payload["mr"] else None
    return Origin(payload["kind"], mr)


def _task_to_payload(task: Task) -> dict:
    return {
        "id": task.id,
        "description": task.description,
        "entry_point": task.entry_point,
        "oracle_solution": task.oracle_solution,
        "oracle_tests": list(task.oracle_tests),
        "dataset": task.dataset,
    }


def _task_from_payload(payload: dict) -> Task:
    return Task(
        id=payload["id"],
        description=payload["description"],
        entry_point=payload["entry_point"],
        oracle_solution=payload["oracle_solution"],
        oracle_tests=tuple(payload["oracle_tests"]),
        dataset=payload["dataset"],
    )


def _description_variant_to_payload(v: DescriptionVariant) -> dict:
    return {
        "task_id": v.task_id,
        "mr": v.mr.code,
        "text": v.text,
        "similarity": v.similarity,
        "status": v.status.value,
        "attempt": v.attempt,
    }


def _description_variant_from_payload(payload: dict) -> DescriptionVariant:
    return DescriptionVariant(
        task_id=payload["task_id"],
        mr=MR_CATALOG[payload["mr"]],
        text=payload["text"],
        similarity=payload["similarity"],
        status=VariantStatus(payload["status"]),
        attempt=payload["attempt"],
    )


def _test_variant_to_payload(v: TestVariant) -> dict:
    return {
        "origin_index": v.origin_index,
        "mr": v.mr.code,
        "case": case_to_payload(v.case),
        "expected_state": v.expected_state.value,
        "status": v.status.value,
        "source": v.source.value,
        "rule": v.rule,
        "reason": v.reason,
    }


def _test_variant_from_payload(payload: dict) -> TestVariant:
    return TestVariant(
        origin_index=payload["origin_index"],
        mr=MR_CATALOG[payload["mr"]],
        case=case_from_payload(payload["case"]),
        expected_state=ExpectedState(payload["expected_state"]),
        status=TestStatus(payload["status"]),
        source=VariantSource(payload["source"]),
        rule=payload["rule"],
        reason=payload["reason"],
    )


def _candidate_to_payload(c: CandidateSolution) -> dict:
    return {
        "task_id": c.task_id,
        "origin": _origin_to_payload(c.origin),
        "sample_index": c.sample_index,
        "source_code": c.source_code,
        "raw_response_id": c.raw_response_id,
        "extraction": c.extraction,
    }


def _candidate_from_payload(payload: dict) -> CandidateSolution:
    return CandidateSolution(
        task_id=payload["task_id"],
        origin=_origin_from_payload(payload["origin"]),
        sample_index=payload["sample_index"],
        source_code=payload["source_code"],
        raw_response_id=payload["raw_response_id"],
        extraction=payload["extraction"],
    )


def _run_metrics_to_payload(m: RunMetrics) -> dict:
    return {
        "pass_at_1": m.pass_at_1,
        "pass_at_5": m.pass_at_5,
        "branch_coverage_pct": m.branch_coverage_pct,
        "correctness_rate_pct": m.correctness_rate_pct,
        "tokens_in": m.tokens_in,
        "tokens_out": m.tokens_out,
    }


def _run_metrics_from_payload(payload: dict) -> RunMetrics:
    return RunMetrics(
        pass_at_1=payload["pass_at_1"],
        pass_at_5=payload["pass_at_5"],
        branch_coverage_pct=payload["branch_coverage_pct"],
        correctness_rate_pct=payload["correctness_rate_pct"],
        tokens_in=payload["tokens_in"],
        tokens_out=payload["tokens_out"],
    )


_ENCODERS = [
    (Task, "task", _task_to_payload),
    (DescriptionVariant, "description_variant", _description_variant_to_payload),
    (TestVariant, "test_variant", _test_variant_to_payload),
    (CandidateSolution, "candidate_solution", _candidate_to_payload),
    (RunMetrics, "run_metrics", _run_metrics_to_payload),
]

_DECODERS = {
    "task": _task_from_payload,
    "description_variant": _description_variant_from_payload,
    "test_variant": _test_variant_from_payload,
    "candidate_solution": _candidate_from_payload,
    "run_metrics": _run_metrics_from_payload,
}


def payload_of(obj) -> tuple[str, dict]:
    """Serialize a core object to its (kind, payload) ledger form."""
    for cls, kind, encode in _ENCODERS:
        if isinstance(obj, cls):
            return kind, encode(obj)
    raise TypeError(f"no ledger payload codec for {type(obj).__name__}")


def from_payload(kind: str, payload: dict):
    """Inverse of payload_of."""
    return _DECODERS[kind](payload)
