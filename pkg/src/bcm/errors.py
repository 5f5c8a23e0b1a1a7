"""Exception hierarchy. The CLI maps these onto exit codes."""


class BcmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BcmError):
    """Invalid hyperparameters, chain configuration, or CLI options (exit 1)."""


class DataError(BcmError):
    """Malformed, inconsistent, or insufficient data (exit 2)."""


class NumericalError(BcmError):
    """Numerical failure: non-finite scores, diverged count tables (exit 3)."""
