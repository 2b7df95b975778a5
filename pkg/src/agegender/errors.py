"""Shared exception types.

The CLI maps these onto exit codes: input/config/dimension problems are
exit code 1, numerical failures are exit code 2.
"""


class DimensionError(ValueError):
    """Shapes or window geometry do not line up."""


class ConfigError(ValueError):
    """Invalid or unknown configuration values."""


class InputError(ValueError):
    """Malformed user-supplied data (manifests, boxes, votes, images)."""


class TapeError(RuntimeError):
    """Misuse of the gradient tape (non-scalar loss, double backward, ...)."""


class NumericalError(ArithmeticError):
    """A computation produced NaN/Inf or otherwise failed numerically."""
