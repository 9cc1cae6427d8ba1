"""Exception hierarchy shared by every module of the package."""


class FeedbackGraphError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FeedbackGraphError, ValueError):
    """A caller-supplied argument violates an operation's precondition."""


class GraphFormatError(InvalidArgumentError):
    """Malformed graph input; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class NotTransitiveError(InvalidArgumentError):
    pass


class EnumerationLimitError(FeedbackGraphError, RuntimeError):
    """More orders / independent sets exist than the caller's cap allows."""

    def __init__(self, what, limit):
        super().__init__(f"more than {limit} {what}; raise the limit or use the transitive pipeline")
        self.limit = limit


class SolverError(FeedbackGraphError, RuntimeError):
    """Numerical solve failed; ``best`` holds the best feasible iterate if any."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InfeasibleError(SolverError):
    pass


class DegenerateOptimumError(SolverError):
    pass


class ContractViolationError(FeedbackGraphError, RuntimeError):
    """An internal invariant or calling contract was broken."""
