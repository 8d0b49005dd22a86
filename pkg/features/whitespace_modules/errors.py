"""
Module: errors.py
Description:
    Exception hierarchy shared by the library and the command-line front end.
    Everything derives from WhitespaceError (a ValueError), so callers that
    only care about "bad input" can catch one class.
"""


class WhitespaceError(ValueError):
    """Base class for every error raised on purpose by whitespace_modules."""


class DegenerateBlockError(WhitespaceError):
    """A block of the sensing matrix is all zero."""


class NonFiniteError(WhitespaceError):
    """NaN or inf found in a matrix or vector."""


class PartitionError(WhitespaceError):
    """Block sizes do not describe a valid partition."""


class DimensionError(WhitespaceError):
    """Shapes of matrices/vectors do not agree."""


class SupportError(WhitespaceError):
    """Empty, repeated or out-of-range support sets and iteration budgets."""


class SignalError(WhitespaceError):
    """Signal has no used (or no unused) block where one is required."""


class ConfigError(WhitespaceError):
    """Configuration document cannot be read or has unknown keys."""


class ValidationError(WhitespaceError):
    """Configuration parsed but violates a semantic constraint."""


class ArtifactError(WhitespaceError):
    """Missing or ill-formed dictionary, selection, matrix or results file."""


class UsageError(WhitespaceError):
    """Bad command line: unknown subcommand, missing or malformed flag."""
