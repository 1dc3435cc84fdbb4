"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


class DegenerateMetric(ArithmeticError):
    """The surface mapping has (near-)vanishing area density somewhere.

    ``location`` carries whatever the caller knows about where it happened
    (face index, parametric point, quadrature index).
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class UnsupportedLocation(ValueError):
    pass


class NumericalFailure(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepRejected(RuntimeError):
    """Raised when a time step cannot be taken with the requested size."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class CapacityError(RuntimeError):
    pass
