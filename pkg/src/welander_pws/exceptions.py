"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class DegenerateError(DomainError):
    """The Filippov construction degenerates (sliding value independent of lambda)."""


class IntegrationError(RuntimeError):
    """Numerical integration failed; ``last_state`` holds the last valid state."""

    def __init__(self, message, last_state=None, time=None):
        super().__init__(message)
        self.last_state = last_state
        self.time = time


class TangencyError(IntegrationError):
    """Step-size underflow or an unresolvable grazing contact with the manifold."""


class SlidingEncountered(IntegrationError):
    """A trajectory expected to cross transversally entered a sliding segment."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge; ``last_iterate`` carries its state."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
