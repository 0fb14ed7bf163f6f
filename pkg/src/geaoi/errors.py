"""Exception types raised by the AoI library."""


class AoIError(ValueError):
    """Base class for all library errors."""


class DomainError(AoIError):
    """An argument lies outside the domain of the operation."""


class DegenerateChainError(AoIError):
    """The channel chain has p + r = 0 and no stationary distribution."""


class InstabilityError(AoIError):
    """The queue (or the AoI) does not admit a finite stationary value."""


class DivergenceError(InstabilityError):
    """The state B is absorbing (r = 0), so the average AoI is infinite."""


class UnsupportedRegimeError(AoIError):
    """Closed forms only cover pe_good = 0, pe_bad = 1; use the simulator."""


class SolverError(AoIError):
    """A numerical step failed (no bracket, singular system)."""


class QueueOverflowError(AoIError):
    """The simulated FCFS queue exceeded its hard cap."""
