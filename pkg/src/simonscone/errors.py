"""Exception hierarchy shared by all modules."""


class SimonsConeError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(SimonsConeError, ValueError):
    pass


class ConvergenceError(SimonsConeError):
    """Iterative method stopped before meeting its tolerance.

    ``residual`` carries the last residual (or bracket width) reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BracketError(SimonsConeError, ValueError):
    pass


class SingularityError(SimonsConeError):
    """ODE step size underflowed; ``last_state`` is the last accepted state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConsistencyError(SimonsConeError):
    """Two independent routes to the same quantity disagree."""


class ConstraintError(SimonsConeError, ValueError):
    pass


class DomainError(SimonsConeError, ValueError):
    """Point lies outside the region where a field is constructed."""
