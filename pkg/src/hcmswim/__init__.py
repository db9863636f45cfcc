"""Two-dimensional simulation of a pivoting link swung with different waveforms."""

from .errors import (
    ConfigurationError,
    DomainError,
    FitError,
    GeometryError,
    HcmSwimError,
    IngestionError,
    NormalizationError,
    NumericalError,
    SolverDivergenceError,
    StepSizeError,
)

__version__ = "0.1.0"
