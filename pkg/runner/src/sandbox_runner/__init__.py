"""Sandboxed executor for untrusted Python programs.

Speaks line-delimited JSON over stdin/stdout: one request per line, one
response per line.  Also usable in-process through :func:`execute_batch`.
"""

from .executor import execute_batch, execute_one
from .protocol import (
    CoverageSummary,
    ExecRequest,
    ExecResponse,
    ProtocolError,
    TestResult,
    TestSpec,
)

__version__ = "0.1.0"

__all__ = [
    "CoverageSummary",
    "ExecRequest",
    "ExecResponse",
    "ProtocolError",
    "TestResult",
    "TestSpec",
    "execute_batch",
    "execute_one",
    "__version__",
]
