"""Client for the external sandbox runner.

The runner is a separate process spoken to exclusively over line-delimited
JSON on its stdin/stdout; nothing here imports runner internals.  One
client owns one runner process and sends one request at a time, respawning
the process if it dies.
"""

from __future__ import annotations

import ast
import dataclasses
import json
import subprocess
import sys
from typing import Optional, Sequence

from .errors import SandboxError

DEFAULT_TIMEOUT_S = 5.0

PASS = "pass"
FAIL = "fail"
ERROR = "error"
TIMEOUT = "timeout"


@dataclasses.dataclass(frozen=True)
class SandboxResult:
    test_id: str
    status: str
    message: str = ""


@dataclasses.dataclass(frozen=True)
class SandboxCoverage:
    branch_covered: int
    branch_total: int
    branch_pct: float


def default_runner_command() -> list[str]:
    return [sys.executable, "-m", "sandbox_runner"]


def _normalize_tests(tests) -> list[dict]:
    normalized = []
    for index, test in enumerate(tests):
        if isinstance(test, str):
            normalized.append({"test_id": f"t{index}", "line": test})
        else:
            test_id, line = test
            normalized.append({"test_id": str(test_id), "line": line})
    return normalized


class SandboxClient:
    def __init__(self, command: Optional[Sequence[str]] = None, env=None):
        self.command = list(command) if command else default_runner_command()
        self.env = env
        self._proc = None
        self._request_counter = 0

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                env=self.env,
                text=True,
            )
        except OSError as exc:
            self._proc = None
            raise SandboxError(f"could not start runner {self.command!r}: {exc}") from exc

    def run(
        self,
        program: str,
        tests,
        *,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        measure_coverage: bool = False,
    ):
        """Execute a program against tests; returns (results, coverage).

        ``tests`` may be bare line strings or (test_id, line) pairs.
        Coverage is None unless requested and reported.
        """
        self._ensure_started()
        self._request_counter += 1
        request = {
            "id": f"q{self._request_counter}",
            "program": program,
            "tests": _normalize_tests(tests),
            "timeout_s": timeout_s,
            "measure_coverage": measure_coverage,
        }
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            self._drop_process()
            raise SandboxError(f"runner connection failed: {exc}") from exc
        if not line:
            self._drop_process()
            raise SandboxError("runner exited without answering")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            self._drop_process()
            raise SandboxError(f"runner sent unparseable output: {exc.msg}") from exc
        if "error" in response:
            raise SandboxError(f"runner rejected the request: {response['error']}")
        if response.get("id") != request["id"]:
            self._drop_process()
            raise SandboxError(
                f"runner answered request {response.get('id')!r}, expected {request['id']!r}"
            )
        results = [
            SandboxResult(r["test_id"], r["status"], r.get("message", ""))
            for r in response["results"]
        ]
        coverage = None
        if response.get("coverage") is not None:
            cov = response["coverage"]
            coverage = SandboxCoverage(
                cov["branch_covered"], cov["branch_total"], cov["branch_pct"]
            )
        return results, coverage

    def probe_values(self, program: str, expressions, *, timeout_s: float = DEFAULT_TIMEOUT_S):
        """Evaluate bare expressions in the program's namespace.

        Returns one (status, value) pair per expression.  A passing probe
        carries the evaluated value, reconstructed from its repr when it is
        a literal; otherwise the raw repr string is kept.  Failing probes
        carry the runner's message.
        """
        results, _ = self.run(program, list(expressions), timeout_s=timeout_s)
        out = []
        for result in results:
            if result.status != PASS:
                out.append((result.status, result.message))
                continue
            try:
                value = ast.literal_eval(result.message)
            except (ValueError, SyntaxError):
                value = result.message
            out.append((PASS, value))
        return out

    def _drop_process(self):
        if self._proc is None:
            return
        try:
            self._proc.kill()
        except OSError:
            pass
        self._proc.wait()
        self._proc = None

    def close(self):
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()
