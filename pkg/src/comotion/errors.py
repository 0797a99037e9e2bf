"""Exception taxonomy shared across the package.

Each class carries the process exit code the CLI uses for it.
"""


class ComotionError(Exception):
    """Base class for package-specific errors."""

    exit_code = 6


class ConfigError(ComotionError, ValueError):
    """Invalid configuration key, value, or parameter."""

    exit_code = 2


class DataError(ComotionError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class ShapeError(ComotionError, ValueError):
    """Operands with incompatible dimensions."""

    exit_code = 4


class NumericError(ComotionError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 5
