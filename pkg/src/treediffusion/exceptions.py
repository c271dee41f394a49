"""Exception hierarchy shared by every module."""


class TreeDiffusionError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(TreeDiffusionError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ArityError(TreeDiffusionError, ValueError):
    pass


class VertexBudgetExceeded(TreeDiffusionError):
    pass


class TruncationBoundary(TreeDiffusionError):
    """Raised when asking for stored successors of a vertex at maximum depth.

    Callers are expected to fall back to the closure rule.
    """


class UnsupportedOperator(TreeDiffusionError):
    pass


class NumericalFailure(TreeDiffusionError, ArithmeticError):
    def __init__(self, message, vertex=None, step=None):
        super().__init__(message)
        self.vertex = vertex
        self.step = step


class IterationLimitError(TreeDiffusionError):
    """Fixed-point iteration did not reach tolerance; ``trace`` holds sup-distances."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class ConfigError(TreeDiffusionError, ValueError):
    pass
