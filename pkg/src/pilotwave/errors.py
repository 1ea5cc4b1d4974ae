"""Exception types shared across the package."""


class PilotwaveError(Exception):
    """Base class for all package errors."""


class DomainError(PilotwaveError):
    """Input outside the mathematical domain of an operation."""


class NodeSingularityError(PilotwaveError):
    """Wavefunction amplitude at or below the node guard threshold.

    The velocity field and quantum potential are undefined on a node;
    callers are expected to catch this and handle the guard band.
    """

    def __init__(self, x, t, rho, message=None):
        self.x = x
        self.t = t
        self.rho = rho
        super().__init__(message or f"node proximity at x={x}, t={t} (rho={rho:.3e})")


class IntegrationError(PilotwaveError):
    """Trajectory integration failed; carries the partial result."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class TurningPointError(PilotwaveError):
    """Semiclassical amplitude singular: endpoint velocity vanishes."""


class ConfigError(PilotwaveError):
    """Scenario configuration invalid; carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
