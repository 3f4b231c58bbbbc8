"""Exception hierarchy shared by all modules."""


class PullInError(Exception):
    """Base class for library errors."""


class InvalidArgument(PullInError, ValueError):
    pass


class DomainError(PullInError, ValueError):
    """A value falls outside the domain of a function (e.g. u >= 1 in g(u))."""


class SingularityError(DomainError):
    pass


class SolverDiverged(PullInError, RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance.

    The last residual is kept on the exception so callers can report it.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EigenDiverged(SolverDiverged):
    pass


class BracketFailure(PullInError, RuntimeError):
    pass


class ConfigError(PullInError, ValueError):
    """Malformed run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
