"""Line-delimited JSON loop over stdin/stdout."""

from __future__ import annotations

import argparse
import json
import sys

from .executor import execute_one
from .protocol import ProtocolError, request_from_dict, response_to_dict


def _emit(stream, payload):
    stream.write(json.dumps(payload) + "\n")
    stream.flush()


def serve(stdin=None, stdout=None, *, allow_network=False, keep_cwd=False) -> int:
    """Process requests until EOF.  A malformed line never stops the loop."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for raw_line in stdin:
        line = raw_line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            _emit(stdout, {"id": None, "error": f"request is not valid JSON: {exc.msg}"})
            continue
        try:
            request = request_from_dict(data)
        except ProtocolError as exc:
            request_id = data.get("id") if isinstance(data, dict) else None
            _emit(stdout, {"id": request_id, "error": str(exc)})
            continue
        response = execute_one(request, allow_network=allow_network, keep_cwd=keep_cwd)
        _emit(stdout, response_to_dict(response))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sandbox-runner",
        description="Run untrusted Python test requests read as JSON lines on stdin.",
    )
    parser.add_argument(
        "--allow-network",
        action="store_true",
        help="leave socket creation available to executed programs",
    )
    parser.add_argument(
        "--keep-cwd",
        action="store_true",
        help="run programs in the current directory instead of a scratch one",
    )
    args = parser.parse_args(argv)
    return serve(allow_network=args.allow_network, keep_cwd=args.keep_cwd)


if __name__ == "__main__":
    sys.exit(main())
