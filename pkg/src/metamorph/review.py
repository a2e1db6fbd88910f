"""Semantic gate for description rewrites and behavioral validation of
test variants.

The similarity gate keeps mutated descriptions close to the original: a
rewrite is accepted at the first attempt whose score clears the threshold,
and after ``max_iterations`` failures the best-scoring attempt is returned
marked exhausted.  Test variants are validated behaviorally by running the
task's oracle solution in the sandbox and probing the value it computes
for the variant's input.
"""

from __future__ import annotations

import dataclasses
import math
import zlib
from typing import Callable, Optional

import numpy as np

from .errors import EmptyText
from .model import (
    DescriptionVariant,
    ExpectedState,
    MRKind,
    TestStatus,
    TestVariant,
    VariantStatus,
)
from .testcases import AssertionCase, ConstExpr, render_call, render_test_case


@dataclasses.dataclass(frozen=True)
class ReviewConfig:
    similarity_threshold: float = 0.8
    max_iterations: int = 3

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be within [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class HashingEmbedder:
    """Deterministic local text embedding over hashed character trigrams.

    Lowercased, whitespace-collapsed text is split into overlapping
    3-grams, each hashed (crc32, stable across processes) into one of
    ``dim`` count buckets.  Crude next to a learned model, but fully
    reproducible, which replay runs depend on.
    """

    def __init__(self, dim: int = 512):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        normalized = " ".join(text.lower().split())
        vector = np.zeros(self.dim, dtype=np.float64)
        if not normalized:
            return vector
        if len(normalized) < 3:
            grams = [normalized]
        else:
            grams = [normalized[i:i + 3] for i in range(len(normalized) - 2)]
        for gram in grams:
            vector[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
        return vector


def similarity_score(a: str, b: str, embedder) -> float:
    """Cosine similarity shifted onto [0, 1]; identical texts score 1.0.

    Count vectors are nonnegative, so in practice scores live in
    [0.5, 1.0], with 0.5 meaning no shared trigrams at all.
    """
    va = embedder.embed(a)
    vb = embedder.embed(b)
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise EmptyText("cannot score an empty description")
    cosine = float(np.dot(va, vb)) / (norm_a * norm_b)
    return (1.0 + cosine) / 2.0


def make_scorer(embedder) -> Callable[[str, str], float]:
    return lambda a, b: similarity_score(a, b, embedder)


def gate_description(
    original: str,
    mutate: Callable[[int, Optional[float]], str],
    cfg: ReviewConfig,
    scorer: Callable[[str, str], float],
    *,
    task_id: str,
    mr: MRKind,
) -> DescriptionVariant:
    """Iterate the mutator until a rewrite clears the similarity bar.

    ``mutate(attempt, prior_score)`` produces attempt texts; the prior
    score is None on the first call.  Acceptance happens at the first
    attempt scoring at or above the threshold.  When every attempt falls
    short, the best one comes back with status ``exhausted``.
    """
    best_text = None
    best_score = -1.0
    best_attempt = 0
    prior_score: Optional[float] = None
    for attempt in range(1, cfg.max_iterations + 1):
        text = mutate(attempt, prior_score)
        score = scorer(original, text)
        if score >= cfg.similarity_threshold:
            return DescriptionVariant(
                task_id=task_id,
                mr=mr,
                text=text,
                similarity=score,
                status=VariantStatus.ACCEPTED,
                attempt=attempt,
            )
        if score > best_score:
            best_text, best_score, best_attempt = text, score, attempt
        prior_score = score
    return DescriptionVariant(
        task_id=task_id,
        mr=mr,
        text=best_text,
        similarity=best_score,
        status=VariantStatus.EXHAUSTED,
        attempt=best_attempt,
    )


def gate_with_llm(
    task,
    mr: MRKind,
    llm,
    cfg: ReviewConfig,
    scorer: Callable[[str, str], float],
    *,
    language: str = "French",
    model: str = "default",
    seed: Optional[int] = None,
) -> DescriptionVariant:
    """Drive gate_description with an LLM-backed mutator.

    Each retry feeds the previous rewrite and its score back into the
    prompt, so refinement attempts stay distinguishable in a replay store.
    """
    from .mutate import mutate_description

    state = {"prior": None}

    def mutate_once(attempt: int, prior_score: Optional[float]) -> str:
        variant = mutate_description(
            task,
            mr,
            llm,
            attempt=attempt,
            prior_text=state["prior"],
            prior_score=prior_score,
            language=language,
            model=model,
            seed=seed,
        )
        state["prior"] = variant.text
        return variant.text

    return gate_description(
        task.description, mutate_once, cfg, scorer, task_id=task.id, mr=mr
    )


def values_match(expected, actual) -> bool:
    """Compare two literal values the way an assertion oracle would.

    Numbers compare with a small tolerance, bools never equal ints, and
    containers recurse element-wise.
    """
    if isinstance(expected, bool) or isinstance(actual, bool):
        return isinstance(expected, bool) and isinstance(actual, bool) and expected == actual
    if isinstance(expected, (int, float)) and isinstance(actual, (int, float)):
        return math.isclose(expected, actual, rel_tol=1e-9, abs_tol=1e-12)
    if isinstance(expected, (list, tuple)):
        if type(expected) is not type(actual) or len(expected) != len(actual):
            return False
        return all(values_match(e, a) for e, a in zip(expected, actual))
    if isinstance(expected, dict):
        if not isinstance(actual, dict) or set(expected) != set(actual):
            return False
        return all(values_match(v, actual[k]) for k, v in expected.items())
    return type(expected) is type(actual) and expected == actual


def validate_test_variant(
    variant: TestVariant,
    oracle: str,
    sandbox,
    *,
    timeout_s: float = 5.0,
) -> TestVariant:
    """Decide a variant's validity by executing the oracle solution.

    Pending-oracle variants get their expected value filled from the
    oracle's output.  Variants that arrived with an expected value keep
    it and are valid only when the oracle agrees.  Oracle crashes and
    timeouts on the variant's input invalidate it with a reason; sandbox
    transport failures propagate as SandboxError.
    """
    if variant.status is TestStatus.DUPLICATE:
        return variant

    probe_line = render_call(variant.case)
    ((status, value),) = sandbox.probe_values(oracle, [probe_line], timeout_s=timeout_s)

    if status == "timeout":
        return dataclasses.replace(
            variant,
            status=TestStatus.INVALID,
            reason=f"oracle timed out on {probe_line}",
        )
    if status != "pass":
        return dataclasses.replace(
            variant,
            status=TestStatus.INVALID,
            reason=f"oracle failed on {probe_line}: {value}",
        )

    if variant.expected_state is ExpectedState.PENDING_ORACLE:
        filled = AssertionCase(
            callee=variant.case.callee,
            args=variant.case.args,
            expected=ConstExpr.literal(value),
        )
        filled = dataclasses.replace(filled, raw=render_test_case(filled))
        return dataclasses.replace(
            variant,
            case=filled,
            expected_state=ExpectedState.ORACLE_FILLED,
            status=TestStatus.VALID,
        )

    expected = variant.case.expected.value
    if values_match(expected, value):
        return dataclasses.replace(variant, status=TestStatus.VALID)
    return dataclasses.replace(
        variant,
        status=TestStatus.INVALID,
        reason=f"expected {expected!r} but the oracle computed {value!r}",
    )
