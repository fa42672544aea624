"""Exception hierarchy shared by the numerical modules and the CLI."""


class TurbGreenError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TurbGreenError, ValueError):
    """Invalid scenario document or parameter combination."""


class SingularityError(TurbGreenError, ValueError):
    """A kernel was evaluated at (or too close to) its singular point."""


class OrderingError(TurbGreenError, ValueError):
    """Paraxial evaluation requested against the propagation direction."""


class OutOfRangeError(TurbGreenError, ValueError):
    """Lookup outside the tabulated range (no extrapolation is done)."""


class NumericalError(TurbGreenError, ArithmeticError):
    """Non-finite values or a failed numerical consistency check."""
