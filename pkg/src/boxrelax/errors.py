"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class UnsupportedRegime(InvalidArgument):
    """Raised for measurement ratios at or below the recovery threshold delta = 1/2."""

    def __init__(self, delta):
        super().__init__(
            f"delta={delta!r} is not supported: the box relaxation requires "
            "delta > 1/2 (recovery threshold)"
        )
        self.delta = delta


class NumericalFailure(RuntimeError):
    pass


class ConvergenceError(NumericalFailure):
    """Iterative solver hit its iteration cap before meeting the tolerance.

    The last iterate and its residual are attached so callers can inspect
    or log them.
    """

    def __init__(self, message, x=None, residual=None, iterations=None):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class AggregateFailure(NumericalFailure):
    pass
