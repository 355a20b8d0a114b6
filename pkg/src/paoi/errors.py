"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit status 2 and
:class:`NumericalError` to exit status 3.
"""


class ConfigError(ValueError):
    """A configuration violates one of its invariants."""


class DimensionError(ValueError):
    """Array arguments have inconsistent shapes."""


class NumericalError(ArithmeticError):
    """A computation produced a non-finite or otherwise invalid value."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (sample {index})")
        self.index = index


class PgfArithmeticError(NumericalError):
    """Invalid operation on rational generating functions (e.g. division by zero)."""
