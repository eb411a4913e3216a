"""Exception hierarchy of lamstack."""

from __future__ import annotations

from collections.abc import Sequence


class LamstackError(Exception):
    """Base class of all errors raised by lamstack."""


class InvalidArgumentError(LamstackError, ValueError):
    pass


class DegenerateGeometryError(InvalidArgumentError):
    pass


class OutsideDomainError(InvalidArgumentError):
    pass


class MeshError(LamstackError, ValueError):
    """A mesh violates one of its topological invariants."""


class MeshParseError(MeshError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidProblemError(LamstackError, ValueError):
    pass


class ConfigError(LamstackError, ValueError):
    pass


class SolverError(LamstackError, RuntimeError):
    pass


class SingularMatrixError(SolverError):
    def __init__(
        self, message: str, index: int | None = None, block: str | None = None
    ) -> None:
        self.index = index
        self.block = block
        details = []
        if index is not None:
            details.append(f"index {index}")
        if block is not None:
            details.append(f"block {block!r}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class ConvergenceError(SolverError):
    def __init__(self, message: str, history: Sequence[float]) -> None:
        self.history = list(history)
        super().__init__(f"{message} after {len(self.history)} iterations")


class BreakdownError(ConvergenceError):
    pass
