from __future__ import annotations

from typing import Optional


class AcidifyError(Exception):
    """Base class for every diagnostic raised by the engine."""

    code = "ACIDIFY-ERROR"

    def __init__(self, message: str, *, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class EvalError(AcidifyError):
    code = "EVAL-ERROR"


class LocalContextViolation(AcidifyError):
    code = "LOCAL-CONTEXT-VIOLATION"


class UnknownSpecError(AcidifyError):
    code = "UNKNOWN-SPEC"


class UnknownStoreError(AcidifyError):
    code = "UNKNOWN-STORE"


class UnknownBenchmarkError(AcidifyError):
    code = "UNKNOWN-BENCHMARK"


class NestedBindDepthError(AcidifyError):
    code = "NESTED-BIND-DEPTH"


class UnsupportedCommandError(AcidifyError):
    code = "UNSUPPORTED-COMMAND"


class EncodingError(AcidifyError):
    code = "ENCODING-ERROR"


class SolverError(AcidifyError):
    code = "SOLVER-ERROR"


class SolverUnavailableError(SolverError):
    code = "SOLVER-UNAVAILABLE"


class ParseError(AcidifyError):
    """Syntax, arity or scope error pointing at a span of the source text."""

    code = "PARSE-ERROR"

    def __init__(self, message: str, *, line: int = 0, column: int = 0, source: str = "<input>"):
        super().__init__(message)
        self.line = line
        self.column = column
        self.source = source

    def __str__(self) -> str:
        return f"{self.source}:{self.line}:{self.column}: {self.code}: {self.message}"
