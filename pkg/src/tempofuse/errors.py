"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericError`` -> 3.
"""


class TempofuseError(Exception):
    """Base class for every error raised deliberately by this package."""


class ShapeError(TempofuseError, ValueError):
    """Operand shapes are incompatible for an operation."""


class DataError(TempofuseError, ValueError):
    """Input data violates a format or content contract."""


class NumericError(TempofuseError, RuntimeError):
    """A computation produced a non-finite value."""


class CheckpointError(TempofuseError, ValueError):
    """A checkpoint file is unreadable, truncated, or from another version."""
