"""Exception types raised by the solvers and the certification layer."""


class RateBVError(Exception):
    """Base class for all package errors."""


class DomainError(RateBVError, ValueError):
    """Input outside the domain of a functional (non-finite state, bad shape)."""


class ArgumentError(RateBVError, ValueError):
    """Inconsistent arguments, e.g. a trajectory paired with the wrong load."""


class NumericalError(RateBVError, RuntimeError):
    """An inner iteration did not reach its tolerance within the iteration cap.

    Attributes
    ----------
    residual : float
        Last optimality residual observed.
    step : int or None
        Index of the time step that failed, when raised by a time integrator.
    """

    def __init__(self, message, residual=float("nan"), step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class InvariantViolation(RateBVError, AssertionError):
    """A mathematical inequality that must hold by construction was violated."""


class EvaluationError(RateBVError):
    """A reduced-objective evaluation failed; carries the offending load."""

    def __init__(self, message, load=None):
        super().__init__(message)
        self.load = load
