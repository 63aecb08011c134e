"""Exception hierarchy shared by the library and mapped onto CLI exit codes."""


class CfvError(Exception):
    exit_code = 1


class ValidationError(CfvError, ValueError):
    """Bad argument, configuration value or shape."""

    exit_code = 2


class FormatError(CfvError):
    """Unreadable, truncated or inconsistent file."""

    exit_code = 3


class NumericError(CfvError, ArithmeticError):
    """Non-finite values detected during computation."""

    exit_code = 4


class InactiveComponentError(ValidationError):
    """A mixture component carries negligible posterior mass."""
