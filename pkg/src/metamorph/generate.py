"""Zero-shot code and test generation.

Every description variant in play gets the same prompt template and the
same sample budget, so candidate pools from different variants stay
comparable.  Responses are mined for code rather than trusted: a fenced
block wins, otherwise the longest run of lines opening with ``def``.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from typing import Optional

from .errors import (
    AuthError,
    NoCodeFound,
    ParseError,
    ProviderError,
    ReplayMiss,
    TemplateError,
)
from .gateway import ChatMessage, ChatRequest, chat
from .model import CandidateSolution, Origin, Task
from .testcases import parse_test_case

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 1024
DEFAULT_SAMPLE_COUNT = 5


class PromptMode(enum.Enum):
    CODE_GEN = "codegen"
    TEST_GEN = "testgen"


@dataclasses.dataclass(frozen=True)
class GenParams:
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    sample_count: int = DEFAULT_SAMPLE_COUNT


@dataclasses.dataclass(frozen=True)
class PromptSpec:
    mode: PromptMode
    system: str
    user: str
    params: GenParams


_CODE_SYSTEM = (
    "You are a careful Python programmer. Reply with one complete, "
    "self-contained solution in a single fenced code block and nothing else."
)

_TEST_SYSTEM = (
    "You write minimal input-output test cases for Python functions. Reply "
    "with assert statements only, one per line, and nothing else."
)


def _signature_hint(task: Task) -> str:
    """Best-effort signature reconstructed from the first parseable test."""
    for line in task.oracle_tests:
        try:
            case = parse_test_case(line)
        except ParseError:
            continue
        params = ", ".join(f"arg{i}" for i in range(len(case.args)))
        return f"def {task.entry_point}({params}):"
    return f"def {task.entry_point}(...):"


def build_prompt(
    task: Task,
    description: str,
    mode: PromptMode,
    params: GenParams = GenParams(),
) -> PromptSpec:
    """Render the zero-shot prompt for one description variant."""
    if not description or not description.strip():
        raise TemplateError(f"empty description for task {task.id!r}")
    if mode is PromptMode.CODE_GEN:
        user = (
            "Solve this programming problem in Python.\n\n"
            f"{description}\n\n"
            f"Implement exactly this function:\n{_signature_hint(task)}\n"
            "Include any helpers it needs."
        )
        return PromptSpec(mode, _CODE_SYSTEM, user, params)
    user = (
        "Write test cases for this programming problem.\n\n"
        f"{description}\n\n"
        f"Each test must be a single line of the form "
        f"`assert {task.entry_point}(<input>) == <expected>` using only "
        "literal values."
    )
    return PromptSpec(mode, _TEST_SYSTEM, user, params)


_FENCE = re.compile(r"```[ \t]*(?:python|py)?[ \t]*\n(.*?)```", re.DOTALL)

# statements that plausibly continue a top-level code run
_CODE_OPENERS = ("def ", "async def ", "class ", "import ", "from ", "@", "#", ")")


def _extract_tagged(text: str):
    for match in _FENCE.finditer(text):
        block = match.group(1).strip("\n").rstrip()
        if block.strip():
            return block, "fenced"

    lines = text.splitlines()
    best = None
    for start, line in enumerate(lines):
        if not (line.startswith("def ") or line.startswith("async def ")):
            continue
        end = start + 1
        while end < len(lines):
            candidate = lines[end]
            if candidate.strip() == "" or candidate[0] in (" ", "\t"):
                end += 1
                continue
            if candidate.startswith(_CODE_OPENERS):
                end += 1
                continue
            break
        run = "\n".join(lines[start:end]).rstrip()
        if best is None or len(run) > len(best):
            best = run
    if best is not None:
        return best, "bare"
    raise NoCodeFound("response contains neither a fenced block nor a def line")


def extract_code(response: str) -> str:
    """Pull program text out of a model response.

    The first non-empty fenced block wins; without fences, the longest run
    of lines starting at a top-level ``def`` is taken.  Extracting from an
    already-extracted program returns it unchanged.
    """
    code, _ = _extract_tagged(response)
    return code


def extract_test_lines(response: str) -> list[str]:
    """Collect the assert lines in a response that actually parse."""
    lines = []
    for raw_line in response.splitlines():
        line = raw_line.strip().strip("`")
        if not line.startswith("assert"):
            continue
        try:
            parse_test_case(line)
        except ParseError:
            continue
        lines.append(line)
    return lines


def generate_candidates(
    task: Task,
    descriptions,
    llm,
    n: int = DEFAULT_SAMPLE_COUNT,
    *,
    model: str,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    seed: Optional[int] = None,
) -> list[CandidateSolution]:
    """Sample n solutions per description; the pool size never shrinks.

    ``descriptions`` is a sequence of (origin, text) pairs.  A response
    with no extractable code still occupies its pool slot, flagged with
    ``extraction="none"`` and empty source, so pass rates stay honest.
    Replay misses and auth failures propagate; other provider errors are
    flagged the same way as extraction failures.
    """
    params = GenParams(temperature=temperature, max_tokens=max_tokens, sample_count=n)
    candidates = []
    for origin, text in descriptions:
        spec = build_prompt(task, text, PromptMode.CODE_GEN, params)
        for sample_index in range(n):
            request = ChatRequest(
                messages=(
                    ChatMessage("system", spec.system),
                    ChatMessage("user", spec.user),
                ),
                model=model,
                temperature=temperature,
                max_tokens=max_tokens,
                seed=None if seed is None else seed + sample_index,
            )
            source_code, extraction, digest = "", "none", None
            try:
                result = chat(request, llm)
                digest = result.digest
                source_code, extraction = _extract_tagged(result.text)
            except NoCodeFound:
                pass
            except (ReplayMiss, AuthError):
                raise
            except ProviderError:
                pass
            candidates.append(
                CandidateSolution(
                    task_id=task.id,
                    origin=origin,
                    sample_index=sample_index,
                    source_code=source_code,
                    raw_response_id=digest,
                    extraction=extraction,
                )
            )
    return candidates


def candidate_prompt_request(spec: PromptSpec, model: str, seed: Optional[int]) -> ChatRequest:
    """Materialize a PromptSpec into a transportable chat request."""
    return ChatRequest(
        messages=(ChatMessage("system", spec.system), ChatMessage("user", spec.user)),
        model=model,
        temperature=spec.params.temperature,
        max_tokens=spec.params.max_tokens,
        seed=seed,
    )
