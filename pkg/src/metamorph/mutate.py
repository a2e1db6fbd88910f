"""Metamorphic mutation of problem descriptions and test cases.

Description rewrites go through an LLM provider and come back as pending
variants for the review gate.  Test-case transformations are rule-based:
each rule rewrites only the input side of an assertion and leaves the
expected value to be filled in by the oracle later, so a buggy rule cannot
smuggle in a wrong expectation.  Lines the parser cannot handle can
optionally be sent to the LLM instead.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

from .errors import DomainError, EmptyMutation, ParseError
from .gateway import ChatMessage, ChatRequest, chat
from .model import (
    ExpectedState,
    MRKind,
    MRTarget,
    Task,
    TestStatus,
    TestVariant,
    VariantSource,
    VariantStatus,
    DescriptionVariant,
)
from .testcases import (
    AssertionCase,
    ConstExpr,
    canonical_input_key,
    parse_test_case,
)

DEFAULT_MUTATION_TEMPERATURE = 0.7
DEFAULT_MUTATION_MAX_TOKENS = 512

_SYSTEM_PROMPT = (
    "You rewrite programming problem descriptions. Reply with the rewritten "
    "description only, with no preamble, commentary, or code."
)

_DESCRIPTION_INSTRUCTIONS = {
    "MR1": (
        "Rewrite the problem statement so its central condition or goal is "
        "expressed in negated form, while the task itself stays the same and "
        "remains solvable. Keep every number, name, and constraint."
    ),
    "MR2": (
        "Translate the problem statement into {language}. Preserve every "
        "requirement, number, and identifier exactly."
    ),
    "MR3": (
        "Rewrite the problem statement as a numbered list of explicit steps, "
        "one operation per step, that together describe the same task."
    ),
    "MR4": (
        "Paraphrase the problem statement in different words while preserving "
        "its meaning, constraints, and examples."
    ),
}

_TEST_INSTRUCTIONS = {
    "MR5": "Swap the first two values of the test input.",
    "MR6": "Swap the last two values of the test input.",
    "MR7": (
        "Rewrite a product of a sum in the test input using the distributive "
        "law so the value is unchanged."
    ),
    "MR8": "Remove the last value from the test input and fix the expected output.",
    "MR9": "Extend the test input with one more value and fix the expected output.",
}


@dataclasses.dataclass(frozen=True)
class MutationRequest:
    """Everything needed to build one description-mutation prompt."""

    task: Task
    mr: MRKind
    attempt: int = 1
    prior_text: Optional[str] = None
    prior_score: Optional[float] = None
    language: str = "French"
    model: str = "default"
    temperature: float = DEFAULT_MUTATION_TEMPERATURE
    max_tokens: int = DEFAULT_MUTATION_MAX_TOKENS
    seed: Optional[int] = None


def build_mutation_prompt(request: MutationRequest) -> ChatRequest:
    """Deterministically render a MutationRequest into a chat request.

    Retry prompts embed the rejected text and its similarity score, so each
    refinement attempt has a distinct digest in a replay store.
    """
    mr = request.mr
    if mr.target is not MRTarget.DESCRIPTION:
        raise DomainError(f"{mr.code} targets test cases, not descriptions")
    instruction = _DESCRIPTION_INSTRUCTIONS[mr.code].format(language=request.language)
    parts = [instruction, "", "Problem description:", request.task.description]
    if request.attempt > 1 and request.prior_text is not None:
        parts.append("")
        if request.prior_score is not None:
            parts.append(
                "A previous rewrite was rejected for drifting too far from the "
                f"original (similarity {request.prior_score:.2f}):"
            )
        else:
            parts.append("A previous rewrite was rejected for drifting too far from the original:")
        parts.append(request.prior_text)
        parts.append("Stay closer to the original meaning.")
    return ChatRequest(
        messages=(
            ChatMessage("system", _SYSTEM_PROMPT),
            ChatMessage("user", "\n".join(parts)),
        ),
        model=request.model,
        temperature=request.temperature,
        max_tokens=request.max_tokens,
        seed=request.seed,
    )


def mutate_description(
    task: Task,
    mr: MRKind,
    llm,
    *,
    attempt: int = 1,
    prior_text: Optional[str] = None,
    prior_score: Optional[float] = None,
    language: str = "French",
    model: str = "default",
    temperature: float = DEFAULT_MUTATION_TEMPERATURE,
    max_tokens: int = DEFAULT_MUTATION_MAX_TOKENS,
    seed: Optional[int] = None,
) -> DescriptionVariant:
    """Produce one rewritten description via the given provider.

    The result is always ``pending``; scoring and acceptance are the review
    gate's job.
    """
    request = MutationRequest(
        task=task,
        mr=mr,
        attempt=attempt,
        prior_text=prior_text,
        prior_score=prior_score,
        language=language,
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
        seed=seed,
    )
    result = chat(build_mutation_prompt(request), llm)
    text = result.text.strip()
    if not text:
        raise EmptyMutation(f"{mr.code} rewrite of task {task.id!r} came back empty")
    return DescriptionVariant(
        task_id=task.id,
        mr=mr,
        text=text,
        similarity=None,
        status=VariantStatus.PENDING,
        attempt=attempt,
    )


def _first_sequence_index(args) -> Optional[int]:
    for i, arg in enumerate(args):
        if arg.op == "lit" and isinstance(arg.value, (list, tuple)) and len(arg.value) >= 2:
            return i
    return None


def _rebuild_sequence(original, items):
    return tuple(items) if isinstance(original, tuple) else list(items)


def _replace_arg(args, index, new_expr):
    out = list(args)
    out[index] = new_expr
    return tuple(out)


def _make_variant(case, mr, origin_index, new_args, rule) -> TestVariant:
    return TestVariant(
        origin_index=origin_index,
        mr=mr,
        case=AssertionCase(callee=case.callee, args=tuple(new_args), expected=None),
        expected_state=ExpectedState.PENDING_ORACLE,
        status=TestStatus.PENDING,
        source=VariantSource.RULE_BASED,
        rule=rule,
    )


def _swap_first(case, mr, origin_index):
    i = _first_sequence_index(case.args)
    if i is not None:
        items = list(case.args[i].value)
        items[0], items[1] = items[1], items[0]
        new = ConstExpr.literal(_rebuild_sequence(case.args[i].value, items))
        return [_make_variant(case, mr, origin_index,
                              _replace_arg(case.args, i, new), "swap-first-elements")]
    if len(case.args) >= 2:
        swapped = (case.args[1], case.args[0]) + case.args[2:]
        return [_make_variant(case, mr, origin_index, swapped, "swap-first-args")]
    return []


def _swap_last(case, mr, origin_index):
    i = _first_sequence_index(case.args)
    if i is None:
        return []
    items = list(case.args[i].value)
    items[-2], items[-1] = items[-1], items[-2]
    new = ConstExpr.literal(_rebuild_sequence(case.args[i].value, items))
    return [_make_variant(case, mr, origin_index,
                          _replace_arg(case.args, i, new), "swap-last-elements")]


def _distribute(expr: ConstExpr):
    """Rewrite the first product-of-a-sum found in pre-order, if any."""
    if expr.op == "*":
        left, right = expr.operands
        if right.op == "+":
            return ConstExpr.binary(
                "+",
                ConstExpr.binary("*", left, right.operands[0]),
                ConstExpr.binary("*", left, right.operands[1]),
            ), True
        if left.op == "+":
            return ConstExpr.binary(
                "+",
                ConstExpr.binary("*", left.operands[0], right),
                ConstExpr.binary("*", left.operands[1], right),
            ), True
    if expr.op == "lit":
        return expr, False
    new_operands = []
    found = False
    for operand in expr.operands:
        if found:
            new_operands.append(operand)
            continue
        new_operand, found = _distribute(operand)
        new_operands.append(new_operand)
    if not found:
        return expr, False
    if expr.op == "neg":
        return ConstExpr.negate(new_operands[0]), True
    return ConstExpr.binary(expr.op, new_operands[0], new_operands[1]), True


def _distribute_product(case, mr, origin_index):
    for i, arg in enumerate(case.args):
        new_arg, found = _distribute(arg)
        if found:
            return [_make_variant(case, mr, origin_index,
                                  _replace_arg(case.args, i, new_arg), "distribute-product")]
    return []


def _drop_last(case, mr, origin_index):
    i = _first_sequence_index(case.args)
    if i is None:
        return []
    items = list(case.args[i].value)[:-1]
    new = ConstExpr.literal(_rebuild_sequence(case.args[i].value, items))
    return [_make_variant(case, mr, origin_index,
                          _replace_arg(case.args, i, new), "drop-last-element")]


def _append_first(case, mr, origin_index):
    i = _first_sequence_index(case.args)
    if i is None:
        return []
    items = list(case.args[i].value)
    items.append(items[0])
    new = ConstExpr.literal(_rebuild_sequence(case.args[i].value, items))
    return [_make_variant(case, mr, origin_index,
                          _replace_arg(case.args, i, new), "append-first-element")]


def _increment_value(value):
    """Return value with its last number incremented, or None if it has none."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return value + 1
    if isinstance(value, (list, tuple)):
        items = list(value)
        for j in range(len(items) - 1, -1, -1):
            bumped = _increment_value(items[j])
            if bumped is not None:
                items[j] = bumped
                return _rebuild_sequence(value, items)
    return None


def _increment_last(case, mr, origin_index):
    for i in range(len(case.args) - 1, -1, -1):
        arg = case.args[i]
        if arg.op != "lit":
            continue
        bumped = _increment_value(arg.value)
        if bumped is not None:
            new = ConstExpr.literal(bumped)
            return [_make_variant(case, mr, origin_index,
                                  _replace_arg(case.args, i, new), "increment-last-number")]
    return []


def _incremental_data(case, mr, origin_index):
    return _append_first(case, mr, origin_index) + _increment_last(case, mr, origin_index)


_RULES = {
    "MR5": _swap_first,
    "MR6": _swap_last,
    "MR7": _distribute_product,
    "MR8": _drop_last,
    "MR9": _incremental_data,
}


def apply_test_mr(case: AssertionCase, mr: MRKind, origin_index: int = 0) -> list[TestVariant]:
    """Apply one test-case MR to a parsed assertion.

    Returns zero or more input-only variants in a fixed sub-rule order;
    an empty list means the rule does not apply to this input shape.
    """
    if mr.target is not MRTarget.TEST_CASE:
        raise DomainError(f"{mr.code} targets descriptions, not test cases")
    return _RULES[mr.code](case, mr, origin_index)


def _llm_test_variant(line, mr, origin_index, task, llm, model, seed):
    req = ChatRequest(
        messages=(
            ChatMessage(
                "system",
                "You transform one Python assert statement. Reply with a "
                "single assert line of the form "
                "`assert fn(args) == expected` and nothing else.",
            ),
            ChatMessage(
                "user",
                f"{_TEST_INSTRUCTIONS[mr.code]}\n\nTest case:\n{line}",
            ),
        ),
        model=model,
        temperature=DEFAULT_MUTATION_TEMPERATURE,
        max_tokens=DEFAULT_MUTATION_MAX_TOKENS,
        seed=seed,
    )
    result = chat(req, llm)
    for candidate in result.text.splitlines():
        candidate = candidate.strip().strip("`")
        if not candidate.startswith("assert"):
            continue
        try:
            parsed = parse_test_case(candidate)
        except ParseError:
            continue
        return TestVariant(
            origin_index=origin_index,
            mr=mr,
            case=parsed,
            expected_state=ExpectedState.AS_TRANSFORMED,
            status=TestStatus.PENDING,
            source=VariantSource.LLM_BASED,
        )
    return None


def expand_suite(
    task: Task,
    mrs,
    *,
    llm=None,
    unparseable: str = "skip",
    model: str = "default",
    seed: Optional[int] = None,
) -> list[TestVariant]:
    """Expand a task's oracle tests with every applicable test-case MR.

    Output order is deterministic: oracle test order, then MR code, then
    the rule's sub-rule order.  A variant whose input duplicates an oracle
    input or an earlier variant's input is dropped.  ``unparseable``
    controls what happens to oracle lines the parser rejects: ``skip``
    them, raise the ``error``, or hand the raw line to the ``llm``.
    """
    if unparseable not in ("skip", "error", "llm"):
        raise ValueError(f"unknown unparseable mode {unparseable!r}")
    selected = sorted(
        {mr.code: mr for mr in mrs if mr.target is MRTarget.TEST_CASE}.values(),
        key=lambda m: m.code,
    )
    if not selected:
        return []

    parsed: list = []
    seen = set()
    for index, line in enumerate(task.oracle_tests):
        try:
            case = parse_test_case(line)
        except ParseError:
            if unparseable == "error":
                raise
            parsed.append((index, None, line))
            continue
        parsed.append((index, case, line))
        seen.add(canonical_input_key(case))

    out: list[TestVariant] = []
    for index, case, line in parsed:
        if case is None:
            if unparseable != "llm" or llm is None:
                continue
            for mr in selected:
                variant = _llm_test_variant(line, mr, index, task, llm, model, seed)
                if variant is None:
                    continue
                key = canonical_input_key(variant.case)
                if key in seen:
                    continue
                seen.add(key)
                out.append(variant)
            continue
        for mr in selected:
            for variant in apply_test_mr(case, mr, origin_index=index):
                key = canonical_input_key(variant.case)
                if key in seen:
                    continue
                seen.add(key)
                out.append(variant)
    return out
