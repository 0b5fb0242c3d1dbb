"""Exception hierarchy and warning categories shared by all HiRRR modules."""

import logging
import warnings
from enum import Enum

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels for categorizing failures."""

    RECOVERABLE = "recoverable"  # Caller may retry with other inputs
    CRITICAL = "critical"  # Computation cannot continue
    VALIDATION_FAILURE = "validation_failure"  # Inputs rejected up front


class HirrrError(Exception):
    """Base exception for HiRRR errors."""

    def __init__(self, message: str, severity: ErrorSeverity = ErrorSeverity.CRITICAL):
        super().__init__(message)
        self.severity = severity


class ArgumentError(HirrrError, ValueError):
    """Invalid argument: shape mismatch, out-of-range value, wrong family."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.VALIDATION_FAILURE)


class DomainError(HirrrError, ValueError):
    """Observation outside the support of its family."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.VALIDATION_FAILURE)


class DegenerateInputError(HirrrError):
    """Input is well-formed but carries no usable information."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.VALIDATION_FAILURE)


class UndefinedMetricError(HirrrError):
    """Metric or test is undefined for the given inputs."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.RECOVERABLE)


class ConvergenceError(HirrrError):
    """Iterative procedure left the region where it is well defined."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.CRITICAL)


class DivergingPredictorError(ConvergenceError):
    """Poisson linear predictor grew past the clipping threshold."""


class CalibrationError(HirrrError):
    """Intercept calibration could not bracket the target prevalence."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.RECOVERABLE)


class ConfigError(HirrrError):
    """Malformed configuration value."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.VALIDATION_FAILURE)


class EstimatorError(HirrrError):
    """Unknown estimator or estimator construction failure."""

    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.VALIDATION_FAILURE)


class DegenerateRankWarning(UserWarning):
    """Procrustes target has rank below the requested frame width."""


class EigenTieWarning(UserWarning):
    """The r-th and (r+1)-th eigenvalues coincide."""


class ConvergenceWarning(UserWarning):
    """Iterative fit stopped before meeting its tolerance."""


def warn(message: str, category: type) -> None:
    """Log a warning and raise it through the warnings machinery.

    Args:
        message: Human readable description
        category: Warning class to emit
    """
    logger.warning(message)
    warnings.warn(message, category, stacklevel=3)
