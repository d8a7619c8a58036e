"""Exception types raised across the package."""


class GasbathError(Exception):
    """Base class for all package errors."""


class DomainError(GasbathError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class CondensationError(DomainError):
    """Bose gas at or beyond the condensation threshold."""


class ConvergenceError(GasbathError, RuntimeError):
    """A numerical procedure failed to converge.

    Attributes
    ----------
    diagnostics : dict
        Whatever the failing routine knew when it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StepSizeError(GasbathError, ValueError):
    """Time step too large for the explicit integrator."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class MonitorViolation(GasbathError, RuntimeError):
    """An invariant monitor tripped during time evolution.

    Attributes
    ----------
    snapshot : dict
        Step index, time, offending value and the state at the violation.
    """

    def __init__(self, message, snapshot):
        super().__init__(message)
        self.snapshot = snapshot


class ConfigError(GasbathError, ValueError):
    """Malformed or unknown configuration entry."""
