"""Factory for creating estimators by name."""

import logging
from typing import List

from ..utils.error_handler import EstimatorError
from .base import Estimator
from .glm import GlmEstimator
from .rrr import HirrrEstimator, RrrEstimator

logger = logging.getLogger(__name__)


class EstimatorFactory:
    """Factory for creating and managing estimators."""

    # Registry of available estimators; glm0 is a glm on a restricted design
    _estimators = {
        "glm": GlmEstimator,
        "glm0": GlmEstimator,
        "rrr": RrrEstimator,
        "hirrr": HirrrEstimator,
    }

    @classmethod
    def register_estimator(cls, name: str, estimator_class: type):
        """
        Register a new estimator type.

        Args:
            name: Estimator name
            estimator_class: Estimator class
        """
        cls._estimators[name] = estimator_class
        logger.info(f"Registered estimator: {name}")

    @classmethod
    def create_estimator(cls, name: str) -> Estimator:
        """
        Create an estimator instance.

        Args:
            name: Registered estimator name ("glm", "rrr", "hirrr", ...)

        Returns:
            Estimator instance

        Raises:
            EstimatorError: If the name is unknown or construction fails
        """
        if name not in cls._estimators:
            available = ", ".join(cls._estimators.keys())
            raise EstimatorError(f"Unknown estimator: {name}. Available: {available}")

        try:
            estimator = cls._estimators[name]()
            logger.debug(f"Created {name} estimator")
            return estimator
        except Exception as e:
            logger.error(f"Failed to create {name} estimator: {e}")
            raise EstimatorError(f"Failed to create {name} estimator: {str(e)}") from e

    @classmethod
    def available(cls) -> List[str]:
        return list(cls._estimators.keys())
