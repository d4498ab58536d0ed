"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from typing import Optional


class HdlocError(Exception):
    """Base class for every error raised by hdloc."""


# ---------------------------------------------------------------------------
# Input problems (CLI exit code 2)
# ---------------------------------------------------------------------------


class InputError(HdlocError, ValueError):
    """Malformed or inconsistent input data, files or options."""


class NonFiniteEntry(InputError):
    def __init__(self, row: int, col: int) -> None:
        super().__init__(f"non-finite value at row {row}, column {col}")
        self.row = row
        self.col = col


class GroupTooSmall(InputError):
    def __init__(self, group: int, size: int, minimum: int = 2) -> None:
        super().__init__(f"group {group} has {size} observation(s); at least {minimum} required")
        self.group = group
        self.size = size


class SingleGroup(InputError):
    def __init__(self) -> None:
        super().__init__("at least two groups are required")


class DimensionMismatch(InputError):
    pass


class ParseError(InputError):
    def __init__(self, line: int, col: Optional[int], detail: str = "") -> None:
        where = f"line {line}" if col is None else f"line {line}, column {col}"
        message = f"cannot parse {where}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.line = line
        self.col = col


class LabelMismatch(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class ConfigError(InputError):
    pass


class IoError(InputError):
    pass


# ---------------------------------------------------------------------------
# Numerical problems (CLI exit code 3)
# ---------------------------------------------------------------------------


class NumericalError(HdlocError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class DegenerateSpectrum(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class InvalidMoments(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


__all__ = [
    "HdlocError",
    "InputError",
    "NonFiniteEntry",
    "GroupTooSmall",
    "SingleGroup",
    "DimensionMismatch",
    "ParseError",
    "LabelMismatch",
    "ShapeMismatch",
    "ConfigError",
    "IoError",
    "NumericalError",
    "DegenerateSpectrum",
    "QuadratureFailure",
    "InvalidMoments",
    "SingularCovariance",
]
