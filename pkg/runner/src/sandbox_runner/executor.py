"""Request execution in an isolated child process.

One child per request: the program is compiled once, then every test runs
against a fresh module namespace so state cannot leak between tests, while
coverage outcomes accumulate for the whole request.  Results stream back
over a pipe as they finish, which preserves completed results even when a
later test takes the child down entirely.
"""

from __future__ import annotations

import multiprocessing
import os
import resource
import signal
import sys
import tempfile
import time

from .instrument import BRANCH_PROBE, LOOP_PROBE, BranchTracker, instrument_program
from .protocol import (
    CoverageSummary,
    ExecRequest,
    ExecResponse,
    TestResult,
)

# grace added to the whole-request deadline beyond the per-test budgets
_DEADLINE_SLACK_S = 10.0


class _TestTimeout(Exception):
    pass


def _on_alarm(signum, frame):
    raise _TestTimeout()


def _block_network():
    import socket

    def _refused(*args, **kwargs):
        raise PermissionError("network access is disabled in the sandbox")

    socket.socket = _refused
    socket.create_connection = _refused


def _quarantine_stdio():
    """Point fd 1/2 and the sys streams at /dev/null.

    Generated programs print freely; nothing they write may reach the
    protocol stream, which the parent owns.
    """
    devnull_fd = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull_fd, 1)
    os.dup2(devnull_fd, 2)
    os.close(devnull_fd)
    sys.stdout = open(os.devnull, "w")
    sys.stderr = open(os.devnull, "w")
    sys.stdin = open(os.devnull, "r")


def _run_one_test(program_code, test, timeout_s, tracker):
    module_globals = {
        "__name__": "__sandbox__",
        "__builtins__": __builtins__,
        BRANCH_PROBE: tracker.branch,
        LOOP_PROBE: tracker.loop,
    }
    try:
        test_code = compile(test.line, f"<test:{test.test_id}>", "eval")
        is_expression = True
    except SyntaxError:
        try:
            test_code = compile(test.line, f"<test:{test.test_id}>", "exec")
        except SyntaxError as exc:
            return {"test_id": test.test_id, "status": "error",
                    "message": f"test does not compile: {exc.msg}"}
        is_expression = False

    signal.setitimer(signal.ITIMER_REAL, timeout_s)
    try:
        exec(program_code, module_globals)
        if is_expression:
            value = eval(test_code, module_globals)
            return {"test_id": test.test_id, "status": "pass", "message": repr(value)}
        exec(test_code, module_globals)
        return {"test_id": test.test_id, "status": "pass", "message": ""}
    except _TestTimeout:
        return {"test_id": test.test_id, "status": "timeout",
                "message": f"timed out after {timeout_s}s"}
    except AssertionError as exc:
        message = str(exc) or "assertion failed"
        return {"test_id": test.test_id, "status": "fail", "message": message}
    except BaseException as exc:
        return {"test_id": test.test_id, "status": "error",
                "message": f"{type(exc).__name__}: {exc}"}
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)


def _child_main(conn, request: ExecRequest, allow_network: bool, keep_cwd: bool):
    _quarantine_stdio()
    resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    if not keep_cwd:
        scratch = tempfile.mkdtemp(prefix="sandbox-")
        os.chdir(scratch)
    if not allow_network:
        _block_network()
    signal.signal(signal.SIGALRM, _on_alarm)

    tracker = BranchTracker()
    branch_total = 0
    try:
        if request.measure_coverage:
            program_code, branch_total = instrument_program(request.program)
        else:
            program_code = compile(request.program, "<program>", "exec")
    except SyntaxError as exc:
        for index, test in enumerate(request.tests):
            conn.send(("result", index, {
                "test_id": test.test_id,
                "status": "error",
                "message": f"program does not compile: {exc.msg}",
            }))
        if request.measure_coverage:
            conn.send(("coverage", {"branch_covered": 0, "branch_total": 0}))
        conn.send(("done",))
        conn.close()
        return

    for index, test in enumerate(request.tests):
        result = _run_one_test(program_code, test, request.timeout_s, tracker)
        conn.send(("result", index, result))

    if request.measure_coverage:
        conn.send(("coverage", {
            "branch_covered": len(tracker.outcomes),
            "branch_total": branch_total,
        }))
    conn.send(("done",))
    conn.close()


def execute_one(request: ExecRequest, *, allow_network: bool = False,
                keep_cwd: bool = False) -> ExecResponse:
    """Run one request to completion, surviving anything the program does."""
    ctx = multiprocessing.get_context("fork")
    parent_conn, child_conn = ctx.Pipe(duplex=False)
    proc = ctx.Process(
        target=_child_main,
        args=(child_conn, request, allow_network, keep_cwd),
        daemon=True,
    )
    proc.start()
    child_conn.close()

    deadline = time.monotonic() + len(request.tests) * request.timeout_s + _DEADLINE_SLACK_S
    results: list = [None] * len(request.tests)
    coverage_data = None
    crash_message = "executor crashed"
    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            crash_message = "executor unresponsive"
            break
        try:
            if not parent_conn.poll(remaining):
                crash_message = "executor unresponsive"
                break
            message = parent_conn.recv()
        except (EOFError, OSError):
            break
        if message[0] == "result":
            _, index, payload = message
            results[index] = TestResult(payload["test_id"], payload["status"],
                                        payload["message"])
        elif message[0] == "coverage":
            coverage_data = message[1]
        elif message[0] == "done":
            break

    parent_conn.close()
    proc.join(timeout=0.5)
    if proc.is_alive():
        proc.kill()
        proc.join()

    final = []
    for index, test in enumerate(request.tests):
        if results[index] is None:
            final.append(TestResult(test.test_id, "error", crash_message))
        else:
            final.append(results[index])

    coverage = None
    if coverage_data is not None:
        coverage = CoverageSummary(coverage_data["branch_covered"],
                                   coverage_data["branch_total"])
    return ExecResponse(request.id, tuple(final), coverage)


def execute_batch(requests, *, allow_network: bool = False,
                  keep_cwd: bool = False) -> list[ExecResponse]:
    """Run several independent requests sequentially."""
    return [
        execute_one(request, allow_network=allow_network, keep_cwd=keep_cwd)
        for request in requests
    ]
