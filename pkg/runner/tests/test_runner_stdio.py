"""End-to-end tests over the real stdin/stdout protocol."""

import json
import subprocess
import sys


def spawn():
    return subprocess.Popen(
        [sys.executable, "-m", "sandbox_runner"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )


def roundtrip(proc, payload):
    proc.stdin.write(json.dumps(payload) + "\n")
    proc.stdin.flush()
    return json.loads(proc.stdout.readline())


def simple_request(request_id="r1"):
    return {
        "id": request_id,
        "program": "def f(x):\n    return x + 1\n",
        "tests": [{"test_id": "t0", "line": "assert f(1) == 2"}],
    }


class TestStdioLoop:
    def test_single_request(self):
        proc = spawn()
        try:
            response = roundtrip(proc, simple_request())
            assert response["id"] == "r1"
            assert response["results"][0]["status"] == "pass"
        finally:
            proc.stdin.close()
            assert proc.wait(timeout=10) == 0

    def test_eof_exits_cleanly(self):
        proc = spawn()
        proc.stdin.close()
        assert proc.wait(timeout=10) == 0

    def test_invalid_json_keeps_the_loop_alive(self):
        proc = spawn()
        try:
            proc.stdin.write("this is not json\n")
            proc.stdin.flush()
            error = json.loads(proc.stdout.readline())
            assert error["id"] is None
            assert "error" in error

            response = roundtrip(proc, simple_request("after-garbage"))
            assert response["id"] == "after-garbage"
        finally:
            proc.stdin.close()
            assert proc.wait(timeout=10) == 0

    def test_protocol_error_echoes_the_request_id(self):
        proc = spawn()
        try:
            error = roundtrip(proc, {"id": "broken", "tests": []})
            assert error["id"] == "broken"
            assert "program" in error["error"]
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)

    def test_blank_lines_are_ignored(self):
        proc = spawn()
        try:
            proc.stdin.write("\n\n")
            response = roundtrip(proc, simple_request("after-blanks"))
            assert response["id"] == "after-blanks"
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)

    def test_print_pollution_cannot_corrupt_the_stream(self):
        noisy = {
            "id": "noisy",
            "program": "print('{\"id\": \"fake\"}')\ndef f(x):\n    print(x)\n    return x\n",
            "tests": [{"test_id": "t0", "line": "assert f(3) == 3"}],
        }
        proc = spawn()
        try:
            response = roundtrip(proc, noisy)
            assert response["id"] == "noisy"
            assert response["results"][0]["status"] == "pass"
            follow_up = roundtrip(proc, simple_request("still-clean"))
            assert follow_up["id"] == "still-clean"
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)

    def test_sequential_requests_answer_in_order(self):
        proc = spawn()
        try:
            for i in range(3):
                response = roundtrip(proc, simple_request(f"r{i}"))
                assert response["id"] == f"r{i}"
        finally:
            proc.stdin.close()
            assert proc.wait(timeout=10) == 0

    def test_coverage_travels_over_the_wire(self):
        payload = {
            "id": "cov",
            "program": "def sign(x):\n    if x > 0:\n        return 1\n    return -1\n",
            "tests": [
                {"test_id": "a", "line": "sign(1)"},
                {"test_id": "b", "line": "sign(-1)"},
            ],
            "measure_coverage": True,
        }
        proc = spawn()
        try:
            response = roundtrip(proc, payload)
            assert response["coverage"] == {
                "branch_covered": 2,
                "branch_total": 2,
                "branch_pct": 100.0,
            }
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)
