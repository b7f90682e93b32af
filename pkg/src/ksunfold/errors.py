"""Shared exception types."""


class KSUnfoldError(Exception):
    """Base class for all package errors."""


class DomainError(KSUnfoldError):
    """A state lies outside the admissible domain of a map or vector field
    (e.g. r < r_min for the Kepler right-hand side)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class LiftError(KSUnfoldError):
    """A 3-D state cannot be lifted (|x| = 0)."""


class IntegrationError(KSUnfoldError):
    """Integration failed; carries the time and state where it gave up."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class DegenerateStructureError(KSUnfoldError):
    """The symplectic matrix is (numerically) singular at a state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConfigError(KSUnfoldError):
    """Invalid run configuration (CLI exit code 2)."""
