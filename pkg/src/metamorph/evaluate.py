"""Candidate evaluation: execution reports, pass@k, coverage, ablation.

Pass rates follow the unbiased estimator 1 - C(n-c, k) / C(n, k), computed
per task and then averaged, so tasks with different pool sizes carry equal
weight.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

from .errors import DomainError, SandboxError
from .generate import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, generate_candidates
from .model import (
    CandidateSolution,
    MRTarget,
    Origin,
    TestStatus,
    VariantStatus,
)
from .review import (
    HashingEmbedder,
    ReviewConfig,
    gate_with_llm,
    make_scorer,
    values_match,
)
from .sandbox import SandboxCoverage, SandboxResult


@dataclasses.dataclass(frozen=True)
class ExecutionReport:
    """Outcome of running one candidate against a test suite."""

    candidate: CandidateSolution
    results: tuple[SandboxResult, ...]
    coverage: Optional[SandboxCoverage] = None

    @property
    def test_count(self) -> int:
        return len(self.results)

    @property
    def pass_count(self) -> int:
        return sum(1 for r in self.results if r.status == "pass")

    @property
    def passed(self) -> bool:
        return self.test_count > 0 and self.pass_count == self.test_count


@dataclasses.dataclass(frozen=True)
class ProbeOutcome:
    """One probe expression evaluated across several candidates."""

    expression: str
    statuses: tuple[str, ...]
    values: tuple
    consistent: bool


@dataclasses.dataclass(frozen=True)
class AblationPoint:
    """Averaged pass rates for one candidate pool in an ablation run."""

    label: str
    pass_at_1: float
    pass_at_5: float
    task_count: int


def _require_count(name, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{name} must be an integer, got {value!r}")


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that k samples drawn without replacement from a pool of
    n, of which c are correct, contain at least one correct sample."""
    for name, value in (("n", n), ("c", c), ("k", k)):
        _require_count(name, value)
    if not 0 <= c <= n:
        raise DomainError(f"need 0 <= c <= n, got n={n}, c={c}")
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    return 1.0 - math.comb(n - c, k) / math.comb(n, k)


def average_pass_rate(per_task_counts, k: int) -> float:
    """Mean pass@k over (pool size, correct count) pairs, one per task.

    An empty pool contributes 0.0, and k is clamped to the pool size, so a
    task whose generation was cut short still participates.
    """
    _require_count("k", k)
    if k < 1:
        raise DomainError(f"need k >= 1, got k={k}")
    counts = list(per_task_counts)
    if not counts:
        raise DomainError("no per-task counts to average over")
    rates = []
    for n, c in counts:
        if n == 0:
            rates.append(0.0)
        else:
            rates.append(pass_at_k(n, c, min(k, n)))
    return sum(rates) / len(rates)


def run_candidate(
    candidate: CandidateSolution,
    tests,
    sandbox,
    want_coverage: bool = False,
    *,
    timeout_s: float = 5.0,
) -> ExecutionReport:
    """Execute one candidate against a suite of assert lines."""
    if not candidate.source_code.strip():
        raise DomainError(
            f"candidate {candidate.task_id}/{candidate.sample_index} has no "
            "source code to execute"
        )
    test_list = list(tests)
    if not test_list:
        raise DomainError("cannot evaluate a candidate against an empty suite")
    results, coverage = sandbox.run(
        candidate.source_code,
        test_list,
        timeout_s=timeout_s,
        measure_coverage=want_coverage,
    )
    return ExecutionReport(candidate, tuple(results), coverage)


def coverage_of_suite(program: str, tests, sandbox, *, timeout_s: float = 5.0) -> float:
    """Branch coverage percentage of one suite over one program.

    All tests run in a single sandbox request so outcomes merge into one
    session, matching how a suite exercises a program in practice.
    """
    test_list = list(tests)
    if not test_list:
        raise DomainError("coverage needs at least one test")
    _, coverage = sandbox.run(
        program, test_list, timeout_s=timeout_s, measure_coverage=True
    )
    if coverage is None:
        raise SandboxError("runner returned no coverage data")
    return coverage.branch_pct


def correctness_rate(variants) -> float:
    """Percentage of judged test variants that were valid.

    Duplicates never reached validation and pending variants have not been
    judged yet; neither counts toward the denominator.
    """
    judged = [
        v for v in variants if v.status in (TestStatus.VALID, TestStatus.INVALID)
    ]
    if not judged:
        raise DomainError("correctness rate needs at least one judged variant")
    valid = sum(1 for v in judged if v.status is TestStatus.VALID)
    return 100.0 * valid / len(judged)


def cross_variant_consistency(
    candidates: Sequence[CandidateSolution],
    probe_inputs,
    sandbox,
    *,
    entry_point: str,
    timeout_s: float = 5.0,
) -> list[ProbeOutcome]:
    """Probe several candidates with the same inputs and compare outputs.

    Each probe input is a full argument tuple.  A probe is consistent when
    every candidate evaluates it successfully and all values match.
    """
    pool = list(candidates)
    if len(pool) < 2:
        raise DomainError("consistency needs at least two candidates")
    probes = list(probe_inputs)
    if not probes:
        return []
    expressions = [
        f"{entry_point}({', '.join(repr(arg) for arg in args)})" for args in probes
    ]
    per_candidate = []
    for candidate in pool:
        if not candidate.source_code.strip():
            per_candidate.append([("error", "empty program")] * len(expressions))
            continue
        per_candidate.append(
            sandbox.probe_values(
                candidate.source_code, expressions, timeout_s=timeout_s
            )
        )
    outcomes = []
    for index, expression in enumerate(expressions):
        statuses = tuple(row[index][0] for row in per_candidate)
        values = tuple(row[index][1] for row in per_candidate)
        consistent = all(status == "pass" for status in statuses) and all(
            values_match(values[0], value) for value in values[1:]
        )
        outcomes.append(ProbeOutcome(expression, statuses, values, consistent))
    return outcomes


def ablate(
    tasks,
    mrs,
    llm,
    sandbox,
    *,
    review_cfg: Optional[ReviewConfig] = None,
    scorer=None,
    n: int = 5,
    model: str = "default",
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    seed: Optional[int] = None,
    timeout_s: float = 5.0,
    language: str = "French",
) -> list[AblationPoint]:
    """Measure each description rewrite's contribution to pass rates.

    One candidate pool is generated per task (base description plus every
    accepted rewrite) and then subset per point, so Base, the single-MR
    points, and the full pool all score the same samples.  A rewrite the
    reviewer exhausted drops out of its point and the full pool.
    """
    cfg = review_cfg if review_cfg is not None else ReviewConfig()
    if scorer is None:
        scorer = make_scorer(HashingEmbedder())
    task_list = list(tasks)
    if not task_list:
        raise DomainError("ablation needs at least one task")
    description_mrs = sorted(
        (mr for mr in mrs if mr.target is MRTarget.DESCRIPTION),
        key=lambda mr: mr.code,
    )
    labels = ["Base"] + [mr.code for mr in description_mrs] + ["CMA"]
    per_point: dict[str, list[tuple[int, int]]] = {label: [] for label in labels}

    for task in task_list:
        descriptions = [(Origin.base(), task.description)]
        for mr in description_mrs:
            variant = gate_with_llm(
                task, mr, llm, cfg, scorer, language=language, model=model, seed=seed
            )
            if variant.status is VariantStatus.ACCEPTED:
                descriptions.append((Origin.single(mr), variant.text))
        candidates = generate_candidates(
            task,
            descriptions,
            llm,
            n,
            model=model,
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
        )
        verdict_cache: dict[str, bool] = {}
        verdicts: list[tuple[CandidateSolution, bool]] = []
        for candidate in candidates:
            source = candidate.source_code
            if not source.strip():
                verdicts.append((candidate, False))
                continue
            if source not in verdict_cache:
                report = run_candidate(
                    candidate, task.oracle_tests, sandbox, timeout_s=timeout_s
                )
                verdict_cache[source] = report.passed
            verdicts.append((candidate, verdict_cache[source]))

        def pool_counts(keep):
            flags = [ok for candidate, ok in verdicts if keep(candidate)]
            return (len(flags), sum(flags))

        per_point["Base"].append(pool_counts(lambda c: c.origin.kind == "base"))
        for mr in description_mrs:
            per_point[mr.code].append(
                pool_counts(
                    lambda c, mr=mr: c.origin.kind == "mr" and c.origin.mr == mr
                )
            )
        per_point["CMA"].append(pool_counts(lambda c: True))

    return [
        AblationPoint(
            label=label,
            pass_at_1=average_pass_rate(per_point[label], 1),
            pass_at_5=average_pass_rate(per_point[label], 5),
            task_count=len(per_point[label]),
        )
        for label in labels
    ]
