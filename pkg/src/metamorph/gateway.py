"""Chat-completion gateway.

Every LLM call in the pipeline goes through :func:`chat` with an explicit
provider object, which keeps the transport swappable: a live HTTP endpoint,
a recording wrapper that persists responses to disk, or a replay store that
serves them back byte for byte.  Requests are content-addressed by a sha256
digest over their canonical JSON form, so a replay store is just a directory
of ``<digest>.json`` files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from pathlib import Path
from typing import Iterable, Mapping, Optional

import requests

from .errors import AuthError, ProviderError, RateLimited, ReplayMiss

# Seconds slept between retry attempts on transient transport failures.
BACKOFF_SCHEDULE = (1.0, 2.0, 4.0)

_CHARS_PER_TOKEN = 4


@dataclasses.dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclasses.dataclass(frozen=True)
class ChatRequest:
    """A fully specified completion request.

    ``seed`` is part of the digest only when set, so unseeded requests keep
    stable digests across runs while per-sample seeding still produces
    distinct store entries for each sample.
    """

    messages: tuple[ChatMessage, ...]
    model: str
    temperature: float = 0.2
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self):
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("request needs at least one user message")
        for m in self.messages:
            if not m.content:
                raise ValueError(f"empty content in {m.role} message")


@dataclasses.dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int
    estimated: bool = False


@dataclasses.dataclass(frozen=True)
class ChatResult:
    text: str
    usage: Optional[Usage]
    digest: str


def _request_payload(req: ChatRequest) -> dict:
    params = {
        "model": req.model,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.seed is not None:
        params["seed"] = req.seed
    return {
        "messages": [{"role": m.role, "content": m.content} for m in req.messages],
        "params": params,
    }


def request_digest(req: ChatRequest) -> str:
    """Content digest of a request; identical requests share a digest."""
    body = json.dumps(_request_payload(req), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def estimate_usage(req: ChatRequest, text: str) -> Usage:
    prompt_chars = sum(len(m.content) for m in req.messages)
    return Usage(
        prompt_tokens=prompt_chars // _CHARS_PER_TOKEN,
        completion_tokens=len(text) // _CHARS_PER_TOKEN,
        estimated=True,
    )


class HTTPProvider:
    """OpenAI-style chat endpoint with bounded retries.

    Credentials are read from the environment variable named by
    ``api_key_env`` at call time and travel only in the request header;
    nothing persisted by the gateway contains them.
    """

    def __init__(self, name, endpoint, api_key_env=None, timeout_s=60.0):
        self.name = name
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise AuthError(
                    f"provider {self.name!r} expects an API key in "
                    f"${self.api_key_env}, which is unset"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, req: ChatRequest) -> ChatResult:
        payload = {
            "model": req.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        headers = self._headers()

        last_error = None
        for attempt in range(len(BACKOFF_SCHEDULE) + 1):
            if attempt:
                time.sleep(BACKOFF_SCHEDULE[attempt - 1])
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = ProviderError(f"transport failure: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"provider {self.name!r} rejected credentials")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = RateLimited(
                    f"provider {self.name!r} returned {resp.status_code}"
                )
                continue
            if resp.status_code != 200:
                raise ProviderError(
                    f"provider {self.name!r} returned {resp.status_code}: {resp.text}"
                )
            return self._parse(req, resp.json())
        raise last_error

    def _parse(self, req: ChatRequest, data: Mapping) -> ChatResult:
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed response body: {exc}") from exc
        raw_usage = data.get("usage")
        usage = None
        if isinstance(raw_usage, Mapping):
            try:
                usage = Usage(
                    int(raw_usage["prompt_tokens"]),
                    int(raw_usage["completion_tokens"]),
                )
            except (KeyError, TypeError, ValueError):
                usage = None
        return ChatResult(text, usage, request_digest(req))


class RecordingProvider:
    """Wraps a provider and writes each exchange to a replay store."""

    def __init__(self, inner, store_dir):
        self.inner = inner
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)

    def complete(self, req: ChatRequest) -> ChatResult:
        result = self.inner.complete(req)
        usage = result.usage if result.usage is not None else estimate_usage(req, result.text)
        digest = request_digest(req)
        record = {
            "request": _request_payload(req),
            "response": {"text": result.text},
            "usage": dataclasses.asdict(usage),
        }
        final = self.store_dir / f"{digest}.json"
        tmp = final.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(record, indent=2, sort_keys=True))
        tmp.replace(final)
        return ChatResult(result.text, usage, digest)


class ReplayProvider:
    """Serves previously recorded responses; any unseen request is an error."""

    def __init__(self, store_dir):
        self.store_dir = Path(store_dir)

    def complete(self, req: ChatRequest) -> ChatResult:
        digest = request_digest(req)
        path = self.store_dir / f"{digest}.json"
        if not path.exists():
            raise ReplayMiss(digest)
        data = json.loads(path.read_text())
        usage = Usage(**data["usage"])
        return ChatResult(data["response"]["text"], usage, digest)


def chat(req: ChatRequest, provider) -> ChatResult:
    """Send a request through a provider and normalize the result.

    When the provider reports no token usage, a character-count heuristic
    fills it in and the ``estimated`` flag marks the numbers as approximate.
    """
    result = provider.complete(req)
    if result.usage is None:
        result = ChatResult(result.text, estimate_usage(req, result.text), result.digest)
    return result


@dataclasses.dataclass
class ModuleUsage:
    """Aggregated token counts for one pipeline module."""

    module: str
    prompt_total: int = 0
    completion_total: int = 0
    request_count: int = 0
    per_problem: dict = dataclasses.field(default_factory=dict)

    @property
    def problem_count(self):
        return len(self.per_problem)

    @property
    def avg_prompt(self) -> float:
        if not self.per_problem:
            return 0.0
        return sum(p for p, _ in self.per_problem.values()) / len(self.per_problem)

    @property
    def avg_completion(self) -> float:
        if not self.per_problem:
            return 0.0
        return sum(c for _, c in self.per_problem.values()) / len(self.per_problem)


def usage_summary(records: Iterable[Mapping]) -> dict[str, ModuleUsage]:
    """Summarize ``llm_usage`` ledger records by module.

    Per-problem numbers are the mean over that problem's requests, and the
    module-level average is the mean of those per-problem means, so a
    problem that needed many refinement calls does not dominate.  Records
    of any other kind are ignored, which lets callers pass a whole ledger.
    """
    buckets: dict[str, dict[str, list[tuple[int, int]]]] = {}
    for record in records:
        if record.get("kind") != "llm_usage":
            continue
        payload = record.get("payload", record)
        module = payload["module"]
        task_id = payload["task_id"]
        pair = (int(payload["prompt_tokens"]), int(payload["completion_tokens"]))
        buckets.setdefault(module, {}).setdefault(task_id, []).append(pair)

    summary = {}
    for module, problems in buckets.items():
        usage = ModuleUsage(module)
        for task_id, pairs in problems.items():
            prompt = sum(p for p, _ in pairs)
            completion = sum(c for _, c in pairs)
            usage.prompt_total += prompt
            usage.completion_total += completion
            usage.request_count += len(pairs)
            usage.per_problem[task_id] = (prompt / len(pairs), completion / len(pairs))
        summary[module] = usage
    return summary
