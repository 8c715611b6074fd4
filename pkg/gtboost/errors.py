# ============================================================
# Exception Hierarchy
# Every error carries the exit code the CLI reports for it
# ============================================================


class GTBoostError(Exception):
    """Base class for all errors raised by gtboost."""

    exit_code = 1


class ConfigError(GTBoostError, ValueError):
    """Invalid hyperparameters, flags, config files or grid specs."""

    exit_code = 1


class DataError(GTBoostError, ValueError):
    """Unreadable or inconsistent input data."""

    exit_code = 2


class ModelFormatError(DataError):
    """Truncated, malformed or wrongly-versioned model file."""


class InvariantViolation(GTBoostError, RuntimeError):
    """An internal accounting invariant (operation budget, counter identity) broke."""

    exit_code = 3
