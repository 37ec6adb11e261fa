"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A model, lattice or configuration parameter is outside its valid range."""


class InvalidArgumentError(ValueError):
    """An argument has the wrong shape, length or lattice membership."""


class DegenerateWeightError(ArithmeticError):
    """A likelihood pair has zero total mass, so no posterior exists."""


class ProtocolViolationError(RuntimeError):
    """A message does not match what the receiving endpoint expects."""


class SessionExhaustedError(RuntimeError):
    """The encoder was asked for a round beyond the last guess."""


class TestDegenerateError(ArithmeticError):
    """Every hash entry overflowed, so the closeness statistic is undefined."""

    __test__ = False  # keep pytest from collecting this class


class CacheMissError(LookupError):
    """No constructed code matches the requested configuration."""
