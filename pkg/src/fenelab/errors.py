"""Exception types raised by the solver and the norm toolkit."""


class InvalidArgument(ValueError):
    """Bad sizes, out-of-range indices or mismatched grids."""


class HypothesisViolation(ValueError):
    """An inequality was requested outside the parameter range where it holds."""


class StabilityError(RuntimeError):
    """Explicit time step exceeds its CFL bound."""


class NumericalBreakdown(RuntimeError):
    """Non-finite values or a failed linear solve."""


class AbortedRun(RuntimeError):
    """A run stopped before ``t_end``; ``trajectory`` holds what was computed."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
