import os
import sys
from pathlib import Path

# Make both packages usable from a fresh checkout: the library under test
# on this interpreter's path, and the runner importable by spawned
# subprocesses even when it has not been pip-installed.
_ROOT = Path(__file__).resolve().parents[1]
_RUNNER_SRC = str(_ROOT / "runner" / "src")

if str(_ROOT / "src") not in sys.path:
    sys.path.insert(0, str(_ROOT / "src"))

os.environ["PYTHONPATH"] = _RUNNER_SRC + os.pathsep + os.environ.get("PYTHONPATH", "")
