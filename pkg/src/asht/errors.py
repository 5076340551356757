"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed instance data or inconsistent run configuration."""


class DimensionError(ValidationError):
    """Operands whose shapes cannot be combined."""


class DomainError(ValueError):
    """Numeric input outside the operation's mathematical domain."""


class SolverBudgetError(RuntimeError):
    """Iterative solver exhausted its budget.

    Carries the best iterate found so the caller can still report a bracket.
    """

    def __init__(self, message, best=None, bracket=None):
        super().__init__(message)
        self.best = best
        self.bracket = bracket


class NumericalError(RuntimeError):
    """A finite-precision computation produced non-finite values."""


class InsufficientDataError(RuntimeError):
    """Monte-Carlo estimate impossible at the requested scale."""


class InternalCheckError(RuntimeError):
    """An invariant that should hold by construction was violated; report as a bug."""
