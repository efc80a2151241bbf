"""
Exception hierarchy shared by every ptychoforge module.

Argument-style errors also subclass ValueError / IndexError so callers that
only know the builtin types still catch them.
"""


class PtychoError(Exception):
    """Base class for all ptychoforge errors."""


class ArgumentError(PtychoError, ValueError):
    """An argument is outside its documented range."""


class ShapeError(ArgumentError):
    """Array shapes are inconsistent or unsupported."""


class GeometryError(PtychoError, IndexError):
    """A probe window falls outside the object support."""


class DataError(PtychoError, ValueError):
    """Measured data violates a physical constraint (e.g. negative intensity)."""


class NumericError(PtychoError, ArithmeticError):
    """A computation would divide by zero or produce non-finite values."""


class ConfigurationError(PtychoError):
    """A run cannot start because inputs or settings are missing or inconsistent."""


class FormatError(PtychoError):
    """A PTYT/PTYB/PGM file is malformed. `offset` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class MissingInputError(ConfigurationError):
    """A stage input file does not exist. `path` names it."""

    def __init__(self, path):
        super().__init__(f"missing input file: {path}")
        self.path = path
