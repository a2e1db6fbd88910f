"""Behavioral tests for the in-process executor API."""

import time

import pytest

from sandbox_runner import ExecRequest, execute_batch, execute_one
from sandbox_runner import protocol

DOUBLER = "def f(x):\n    return x * 2\n"

GUARDED = """\
def sign(x):
    if x > 0:
        return 1
    return -1
"""


def request(program, lines, **kwargs):
    tests = tuple(protocol.TestSpec(f"t{i}", line) for i, line in enumerate(lines))
    return ExecRequest(id="req", program=program, tests=tests, **kwargs)


def statuses(response):
    return [r.status for r in response.results]


class TestStatuses:
    def test_pass_fail_error(self):
        response = execute_one(request(DOUBLER, [
            "assert f(2) == 4",
            "assert f(2) == 5",
            "assert f('a') - 1 == 0",
            "assert g(1) == 1",
        ]))
        assert statuses(response) == ["pass", "fail", "error", "error"]
        assert "TypeError" in response.results[2].message
        assert "NameError" in response.results[3].message

    def test_results_keep_request_order_and_ids(self):
        response = execute_one(request(DOUBLER, ["f(1)", "f(2)", "f(3)"]))
        assert [r.test_id for r in response.results] == ["t0", "t1", "t2"]

    def test_program_compile_error_marks_every_test(self):
        response = execute_one(request("def broken(:\n", ["f(1)", "f(2)"]))
        assert statuses(response) == ["error", "error"]
        assert "does not compile" in response.results[0].message

    def test_test_line_compile_error(self):
        response = execute_one(request(DOUBLER, ["assert f(1) ==", "f(1)"]))
        assert statuses(response) == ["error", "pass"]

    def test_assertion_message_is_carried(self):
        program = DOUBLER
        response = execute_one(request(program, ["assert f(1) == 3, 'one doubled'"]))
        assert response.results[0].message == "one doubled"


class TestValueProbe:
    def test_bare_expression_reports_repr(self):
        response = execute_one(request(DOUBLER, ["f(21)", "f('a')", "f([1])"]))
        assert statuses(response) == ["pass", "pass", "pass"]
        assert [r.message for r in response.results] == ["42", "'aa'", "[1, 1]"]

    def test_plain_assert_has_no_value_payload(self):
        response = execute_one(request(DOUBLER, ["assert f(1) == 2"]))
        assert response.results[0].message == ""


class TestIsolation:
    def test_globals_do_not_leak_between_tests(self):
        program = "def remember(x):\n    global seen\n    seen = x\n    return x\n"
        response = execute_one(request(program, [
            "remember(5)",
            "seen",
        ]))
        assert statuses(response) == ["pass", "error"]
        assert "NameError" in response.results[1].message

    def test_module_state_resets_between_tests(self):
        program = "counter = []\ndef bump():\n    counter.append(1)\n    return len(counter)\n"
        response = execute_one(request(program, ["bump()", "bump()"]))
        assert [r.message for r in response.results] == ["1", "1"]

    def test_print_output_does_not_reach_the_caller(self, capfd):
        program = "print('module noise')\ndef f(x):\n    print('call noise')\n    return x\n"
        response = execute_one(request(program, ["assert f(1) == 1"]))
        assert statuses(response) == ["pass"]
        out, err = capfd.readouterr()
        assert "noise" not in out
        assert "noise" not in err

    def test_network_is_blocked_by_default(self):
        program = (
            "import socket\n"
            "def probe():\n"
            "    socket.socket(socket.AF_INET, socket.SOCK_STREAM)\n"
            "    return 1\n"
        )
        response = execute_one(request(program, ["probe()"]))
        assert statuses(response) == ["error"]
        assert "network access is disabled" in response.results[0].message

    def test_system_exit_is_contained(self):
        response = execute_one(request(DOUBLER, ["exit(3)", "f(1)"]))
        assert statuses(response) == ["error", "pass"]


class TestCrashContainment:
    def test_hard_exit_preserves_earlier_results(self):
        program = "import os\ndef f(x):\n    return x\ndef die():\n    os._exit(9)\n"
        response = execute_one(request(program, [
            "assert f(1) == 1",
            "die()",
            "assert f(2) == 2",
        ]))
        assert statuses(response) == ["pass", "error", "error"]
        assert response.results[1].message == "executor crashed"
        assert response.results[2].message == "executor crashed"

    def test_segfault_is_contained(self):
        program = (
            "def die():\n"
            "    import ctypes\n"
            "    ctypes.string_at(0)\n"
        )
        response = execute_one(request(program, ["die()"]))
        assert statuses(response) == ["error"]


class TestTimeouts:
    def test_infinite_loop_times_out_within_budget(self):
        program = "def spin():\n    while True:\n        pass\n"
        started = time.monotonic()
        response = execute_one(request(program, ["spin()"], timeout_s=1.0))
        elapsed = time.monotonic() - started
        assert statuses(response) == ["timeout"]
        assert elapsed < 2.0

    def test_later_tests_still_run_after_a_timeout(self):
        program = (
            "def spin():\n"
            "    while True:\n"
            "        pass\n"
            "def ok():\n"
            "    return 7\n"
        )
        response = execute_one(request(program, ["spin()", "ok()"], timeout_s=1.0))
        assert statuses(response) == ["timeout", "pass"]
        assert response.results[1].message == "7"


class TestCoverage:
    def test_single_branch_half_then_full(self):
        partial = execute_one(request(GUARDED, ["sign(5)"], measure_coverage=True))
        assert partial.coverage.branch_total == 2
        assert partial.coverage.branch_covered == 1
        assert partial.coverage.branch_pct == 50.0

        merged = execute_one(
            request(GUARDED, ["sign(5)", "sign(-5)"], measure_coverage=True)
        )
        assert merged.coverage.branch_covered == 2
        assert merged.coverage.branch_pct == 100.0

    def test_coverage_accumulates_across_failing_tests(self):
        response = execute_one(
            request(GUARDED, ["assert sign(5) == -1", "assert sign(-5) == 1"],
                    measure_coverage=True)
        )
        assert statuses(response) == ["fail", "fail"]
        assert response.coverage.branch_pct == 100.0

    def test_branchless_program_is_fully_covered(self):
        response = execute_one(request(DOUBLER, ["f(1)"], measure_coverage=True))
        assert response.coverage.branch_total == 0
        assert response.coverage.branch_pct == 100.0

    def test_constant_conditions_are_not_counted(self):
        program = (
            "def spin():\n"
            "    n = 0\n"
            "    while True:\n"
            "        n += 1\n"
            "        if n > 3:\n"
            "            break\n"
            "    return n\n"
        )
        response = execute_one(request(program, ["spin()"], measure_coverage=True))
        assert response.coverage.branch_total == 2
        assert response.coverage.branch_covered == 2

    def test_for_loop_counts_entry_and_exhaustion(self):
        program = (
            "def count(xs):\n"
            "    total = 0\n"
            "    for x in xs:\n"
            "        total += 1\n"
            "    return total\n"
        )
        empty_only = execute_one(request(program, ["count([])"], measure_coverage=True))
        assert empty_only.coverage.branch_total == 2
        assert empty_only.coverage.branch_covered == 1

        both = execute_one(request(program, ["count([])", "count([1, 2])"],
                                   measure_coverage=True))
        assert both.coverage.branch_covered == 2

    def test_early_return_leaves_exhaustion_uncovered(self):
        program = (
            "def first(xs):\n"
            "    for x in xs:\n"
            "        return x\n"
            "    return None\n"
        )
        response = execute_one(request(program, ["first([3, 4])"], measure_coverage=True))
        assert response.coverage.branch_total == 2
        assert response.coverage.branch_covered == 1

    def test_coverage_absent_when_not_requested(self):
        response = execute_one(request(GUARDED, ["sign(1)"]))
        assert response.coverage is None


class TestBatch:
    def test_batch_runs_requests_independently(self):
        responses = execute_batch([
            request(DOUBLER, ["assert f(2) == 4"]),
            request("def broken(:\n", ["f(1)"]),
            request(DOUBLER, ["f(10)"]),
        ])
        assert [statuses(r) for r in responses] == [["pass"], ["error"], ["pass"]]
        assert responses[2].results[0].message == "20"
