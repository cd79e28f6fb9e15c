"""Exception types shared across the package."""

from __future__ import annotations


class FlockError(Exception):
    """Base class for all package-specific failures."""


class GraphValidationError(FlockError):
    """An operation required a valid leadership graph and got an invalid one.

    Carries the full list of violations so callers can report them all at once.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid leadership graph: {lines}")


class NegativeDistance(FlockError, ValueError):
    """Kernel evaluated at a negative distance."""


class QuadratureFailure(FlockError):
    """Adaptive quadrature could not reach the requested tolerance."""


class MisalignedDelay(FlockError):
    """The delay is not an integer multiple of the step size."""


class EmptyHorizon(FlockError):
    """The integration horizon is empty (t_end <= 0)."""


class OutOfWindow(FlockError):
    """A history query fell outside the retained time window."""


class NonFiniteState(FlockError):
    """The integrator produced a NaN or infinite component.

    ``time`` is the step time at which the blowup was detected.
    """

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"non-finite state at t={time:g}")


class HistoryExhausted(FlockError):
    """A coefficient lookup needed trajectory data beyond the stored record."""


class OffsetUnavailable(FlockError):
    """The trajectory is too short to fix the Lyapunov offset constant."""


class InsufficientData(FlockError):
    """Too few usable samples for a decay fit."""


class NonPositiveSamples(FlockError):
    """A log-domain fit found no strictly positive samples in the window."""


class ConfigError(FlockError):
    """A run configuration failed validation.

    Aggregates every problem found so a bad config is reported in one pass.
    """

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))
