"""Exception types shared across the simulation pipeline.

Plain invalid arguments raise ValueError; the classes below cover numerical
and capacity failures that callers may want to handle separately.
"""


class SimulationError(Exception):
    """Base class for all package-specific failures."""


class ConvergenceError(SimulationError):
    """An iterative solver stopped without reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GeometryError(SimulationError):
    """Ion positions are unusable (coincident ions, unsupported axis, ...)."""


class InstabilityError(SimulationError):
    """The elasticity matrix has a negative eigenvalue (crystal unstable)."""


class DegenerateModeError(SimulationError):
    """A zero-frequency mode makes the requested quantity ill-defined."""


class CapacityError(SimulationError):
    """The requested problem size exceeds a configured guard."""


class AccuracyError(SimulationError):
    """A numerical accuracy check failed (norm drift, coarse step size)."""


class TruncationWarning(UserWarning):
    """Signals significant population in the top retained Fock level."""


class ConfigError(SimulationError):
    """A run configuration file could not be validated.

    Carries the one-based line number when the problem is tied to a line.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line
