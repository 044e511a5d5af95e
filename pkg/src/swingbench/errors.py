"""Exception hierarchy shared across the package."""


class SwingbenchError(Exception):
    """Base class for all errors raised by swingbench."""


class GridFormatError(SwingbenchError):
    """Malformed grid document (syntax or schema violation).

    Carries an optional location string ("line 12", "buses[3].power")
    to point at the offending part of the document.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class GridValidationError(SwingbenchError):
    """A structurally well-formed grid violates a model invariant."""


class DisconnectedGridError(GridValidationError):
    """The line graph does not connect all buses."""


class PowerImbalanceError(GridValidationError):
    """Injected powers do not sum to zero within tolerance."""


class ParameterError(SwingbenchError):
    """Invalid dynamical-parameter assignment or usage."""


class ConvergenceError(SwingbenchError):
    """An iterative solver failed to reach its tolerance."""


class SimulationError(SwingbenchError):
    """Time integration failed (bad step size, divergence, NaN state)."""


class NoiseError(SwingbenchError):
    """Invalid noise specification or sampling request."""
