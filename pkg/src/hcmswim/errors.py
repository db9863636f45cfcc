"""Exception types shared across the package."""


class HcmSwimError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HcmSwimError, ValueError):
    """Invalid parameters or configuration.

    ``field`` names the offending parameter or config key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DomainError(HcmSwimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SolverDivergenceError(HcmSwimError, RuntimeError):
    """A linear or coupling solve failed to reach its tolerance."""

    def __init__(self, message, residual=float("nan"), step=None):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
        self.step = step


class StepSizeError(HcmSwimError, ValueError):
    """Requested time step violates the CFL bound."""

    def __init__(self, message, cfl):
        super().__init__(message)
        self.cfl = cfl


class IngestionError(HcmSwimError, ValueError):
    """Sampled input data cannot be used."""


class NormalizationError(HcmSwimError, ValueError):
    pass


class GeometryError(HcmSwimError, ValueError):
    pass


class FitError(HcmSwimError, ValueError):
    pass


class NumericalError(HcmSwimError, RuntimeError):
    """Quadrature or iteration did not reach the requested accuracy."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(f"{message} (achieved={achieved:.3e})")
        self.achieved = achieved
