"""
Exception hierarchy.

Every failure the CLI reports with a dedicated exit code derives
from NodaError:
  - FormatError      -> exit 3 (data format)
  - NumericalError   -> exit 4 (blow-up, non-finite loss, failed gradient check)
Usage errors are ValueError subclasses raised before any work starts.
"""

from __future__ import annotations


class NodaError(Exception):
    """Base class for all library errors."""


class GridError(NodaError, ValueError):
    """Invalid grid, transform length, or derivative order."""


class ShapeError(NodaError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, message: str, *shapes: tuple[int, ...]):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class FormatError(NodaError):
    """A binary file does not match the expected container layout."""

    def __init__(self, message: str, offset: int = 0, path: str | None = None):
        where = f" in {path}" if path else ""
        super().__init__(f"{message} at offset {offset}{where}")
        self.offset = offset
        self.path = path


class NumericalError(NodaError):
    """A computation produced non-finite values or failed a numerical check."""


class BlowUpError(NumericalError):
    """Solver state became NaN/Inf."""

    def __init__(self, frame: int, equation: str = ""):
        label = f"{equation} " if equation else ""
        super().__init__(f"{label}solver blew up (non-finite state) at frame {frame}")
        self.frame = frame
        self.equation = equation


class ZeroSignalError(NodaError, ValueError):
    """SNR noise requested for an observation set with zero signal power."""


class MissingObservationError(NodaError, KeyError):
    """A schedule asks for a correction at a frame with no measurement."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing observation"


class TapeError(NodaError, RuntimeError):
    """Misuse of the differentiation tape."""
