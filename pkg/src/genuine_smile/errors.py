"""Exception hierarchy shared by every module of the package."""


class SmileError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SmileError, ValueError):
    """An argument violates an operation's precondition."""


class InsufficientData(SmileError, ValueError):
    """Too few samples to compute the requested quantity."""


class SchemaError(SmileError, ValueError):
    """An input file is missing a required column."""


class DataError(SmileError, ValueError):
    """An input file has malformed content (NaN, non-monotone time, ...)."""


class NumericFailure(SmileError, ArithmeticError):
    """A computation produced non-finite values."""


class LoadFailure(SmileError, OSError):
    """A model or cache file could not be read."""


class VersionMismatch(LoadFailure):
    """A model file was written by an incompatible format version."""
