from __future__ import annotations

from typing import Any


class TwoLevelError(Exception):
    """Base class for every failure the toolkit reports."""
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self._details = details

    def details(self) -> dict[str, Any]:
        return dict(self._details)


class ExpressionSyntaxError(TwoLevelError, ValueError):
    """Raised by the expression parser; carries the byte offset of the failure."""
    exit_code = 2

    def __init__(self, offset: int, expected: str, found: str):
        super().__init__(
            f"syntax error at offset {offset}: expected {expected}, found {found!r}",
            offset=offset, expected=expected, found=found,
        )
        self.offset = offset
        self.expected = expected
        self.found = found


class ConfigError(TwoLevelError, ValueError):
    """Bad user input: configuration, flags, levels or quantum numbers."""
    exit_code = 2


class SimplicityViolation(TwoLevelError):
    """A zero or pole of the generating function is not simple."""
    exit_code = 3


class DegenerateCritical(TwoLevelError):
    exit_code = 3


class RegularityError(TwoLevelError):
    """A critical point has B outside {0, -1}; the potential would be singular."""
    exit_code = 3


class OscillationError(TwoLevelError):
    exit_code = 3


class NonNormalizable(TwoLevelError):
    exit_code = 3


class DegenerateMobius(TwoLevelError):
    exit_code = 3


class InconsistentLevels(TwoLevelError):
    exit_code = 3


class DegenerateSpec(TwoLevelError):
    exit_code = 3


class NonFinitePotential(TwoLevelError):
    exit_code = 4


class ConvergenceFailure(TwoLevelError):
    exit_code = 4


class VerificationFailure(TwoLevelError):
    exit_code = 4

    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report

    def details(self) -> dict[str, Any]:
        return {"report": self.report.to_dict()}


class ValidityError(TwoLevelError):
    """Catalog parameters violate the entry's validity predicate."""
    exit_code = 5
