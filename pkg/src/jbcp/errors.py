"""Exception types shared across the solver stack."""

from __future__ import annotations

__all__ = [
    "SolveFailedError",
    "InstanceInfeasibleError",
    "LineSearchError",
    "DegenerateUserError",
]


class SolveFailedError(RuntimeError):
    """A conic solve ended in a non-optimal status that the caller required."""

    def __init__(self, message: str, status: str = ""):
        super().__init__(message)
        self.status = status


class InstanceInfeasibleError(RuntimeError):
    """The constraint system admits no solution (certificate found)."""


class LineSearchError(RuntimeError):
    """Backtracking exhausted its budget without an acceptable ascent step."""

    def __init__(self, message: str, trace=None, mu=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
        self.mu = mu


class DegenerateUserError(RuntimeError):
    """A user covariance has no positive eigenvalue, so no beamformer exists."""

    def __init__(self, message: str, user: int = -1):
        super().__init__(message)
        self.user = user
