"""Exception hierarchy.

Errors fall into three categories that the CLI maps onto exit codes:
configuration/usage, I/O and file-format, and numeric failures.
"""


class SpecSenseError(Exception):
    """Base class for all package errors."""

    category = "numeric"


class ConfigError(SpecSenseError, ValueError):
    """Invalid configuration or precondition violation."""

    category = "usage"


class CaptureFormatError(SpecSenseError):
    """Capture or table file is missing, truncated, or has the wrong version."""

    category = "io"


class NumericError(SpecSenseError, ArithmeticError):
    category = "numeric"


class DegenerateSpectrumError(NumericError):
    """Eigenvalue statistic is undefined (zero or negative eigenvalues)."""


class ConvergenceError(NumericError):
    """Iterative solver exceeded its iteration cap."""


class DegenerateCdfError(NumericError):
    """A sample maps to F0 = 0 or 1 beyond the clamp tolerance."""


class SupportMismatchError(NumericError):
    """KL divergence undefined: p(i) > 0 where q(i) = 0."""
