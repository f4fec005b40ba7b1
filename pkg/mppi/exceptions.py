"""
Exception hierarchy for the solver package.
"""
from typing import Any, Optional


class MppiError(Exception):
    """Base class of every error raised by mppi."""


class GameFormatError(MppiError, ValueError):
    """Malformed ZSG input or an invalid game; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidStrategyError(MppiError, ValueError):
    """A strategy selects an action that does not exist."""


class ConvergenceError(MppiError, RuntimeError):
    """An iteration cap was hit; ``report`` holds the best result so far."""

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class SingularSystemError(MppiError, RuntimeError):
    """A linear system expected to be nonsingular is singular."""


class InvariantViolation(MppiError, AssertionError):
    """A runtime property check failed."""


class CapExceeded(MppiError):
    """An oracle enumeration exceeds the configured cap."""


class CycleDetected(MppiError):
    """A MIN strategy was selected twice; ``report`` holds the trace."""

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)
