"""Exception hierarchy shared by every qmem module."""


class QmemError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(QmemError, ValueError):
    """Shapes, ranks or parameter values that violate a precondition."""


class CapacityError(QmemError):
    """Requested problem size exceeds the configured cap."""


class ClosureViolationError(QmemError):
    """A matrix basis is not multiplicatively closed (affine products)."""


class StateValidationError(QmemError, ValueError):
    """An initial density matrix or mean vector is not a physical state."""


class NumericOverflowError(QmemError, ArithmeticError):
    """Non-finite values appeared during integration.

    ``time`` holds the first grid time at which the blow-up was detected.
    """

    def __init__(self, message: str, time: float | None = None, partial=None):
        super().__init__(message)
        self.time = time
        # (times, states) integrated before the blow-up, when available
        self.partial = partial


class ModelInconsistencyError(QmemError):
    """The GKSL generator image left the span of {I, X_1, ..., X_n}."""


class IntegratorStepError(QmemError):
    """Trace drift in the density propagation exceeded tolerance."""


class NoDescentDirectionError(QmemError):
    """The control gradient g(z) vanishes, so no control lowers the derivative."""


class ExpansionStateError(QmemError):
    """A value-expansion term was requested before it was solved."""


class ConfigError(QmemError, ValueError):
    """Malformed scenario configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
