"""Exception types shared across the package."""


class HourglassError(Exception):
    """Base class for all package errors."""


class DomainError(HourglassError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegeneratePoleError(HourglassError, ValueError):
    """A longitude-chart quantity was requested at a pole without an ambient representation."""


class ConvergenceError(HourglassError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    ``best`` carries the best iterate found so far (solver specific), so callers
    that treat non-convergence as a soft failure can still report something.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StepSizeUnderflowError(HourglassError, RuntimeError):
    """The adaptive integrator needed a step below the floating-point resolution of t."""


class ChartSwitchError(HourglassError, RuntimeError):
    """Locating the crossing of the pole-chart threshold failed."""


class InconsistentInvariantsError(HourglassError, ValueError):
    """The conserved quantities cannot be realised at the requested height."""


class PreconditionError(HourglassError, ValueError):
    """Input does not satisfy the documented precondition of an operation."""
