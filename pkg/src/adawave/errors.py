"""Exception types shared across the package."""


class AdawaveError(Exception):
    """Base class for all package errors."""


class ConfigError(AdawaveError):
    """A configuration value violates a documented invariant."""


class MeshError(AdawaveError):
    """Invalid mesh topology or geometry."""


class MeshQualityError(MeshError):
    """Shape-regularity or quasi-uniformity bounds violated.

    Raised by local refinement when closure propagation would produce
    elements below the diameter floor or above the aspect bound, which
    usually signals that the marking tolerance is too aggressive.
    """


class NumericalError(AdawaveError):
    """A solver diverged or produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InverseCrimeError(AdawaveError):
    """Data-generation mesh collides with an inversion mesh."""
