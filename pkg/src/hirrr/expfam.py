"""Exponential dispersion families with canonical links.

Each family is written as
``log f(y; theta, phi) = (y*theta - b(theta)) / a(phi) + c(y; phi)`` with
``a(phi) = phi``. Bernoulli and Poisson fix ``phi = 1``.
"""

import logging
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit, gammaln, logit

from .utils.error_handler import ArgumentError, DomainError

logger = logging.getLogger(__name__)

# Linear predictors are clipped here for curvature bounds and divergence checks.
THETA_CLIP = 30.0

BERNOULLI_CLIP = 1e-3
POISSON_FLOOR = 0.1
LOG_2PI = float(np.log(2.0 * np.pi))


class Family(str, Enum):
    """Outcome distribution for one response column."""

    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    POISSON = "poisson"

    @property
    def dispersion_free(self) -> bool:
        """True iff the dispersion is estimated rather than fixed at 1."""
        return self is Family.GAUSSIAN

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        """Accept enum members or case-insensitive names."""
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as e:
            raise ArgumentError(f"Unknown family: {value}") from e


def _check_phi(phi) -> None:
    if np.any(np.asarray(phi) <= 0):
        raise ArgumentError(f"dispersion must be positive, got {phi}")


def check_support(family: Family, y) -> None:
    """
    Raise if any observation lies outside the family's support.

    Raises:
        DomainError: Bernoulli y not in {0,1}; Poisson y not a non-negative integer
    """
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{family.value} observations must be finite")
    if family is Family.BERNOULLI and not np.all((arr == 0) | (arr == 1)):
        raise DomainError("Bernoulli observations must be 0 or 1")
    if family is Family.POISSON and not np.all((arr >= 0) & (arr == np.floor(arr))):
        raise DomainError("Poisson observations must be non-negative integers")


def cumulant(family: Family, theta):
    """Cumulant function b(theta)."""
    theta = np.asarray(theta, dtype=float)
    if family is Family.GAUSSIAN:
        return 0.5 * theta**2
    if family is Family.BERNOULLI:
        return np.logaddexp(0.0, theta)
    return np.exp(theta)


def mean(family: Family, theta):
    """Canonical mean b'(theta); the Bernoulli branch saturates without overflow."""
    theta = np.asarray(theta, dtype=float)
    if family is Family.GAUSSIAN:
        return theta
    if family is Family.BERNOULLI:
        return expit(theta)
    return np.exp(theta)


def link(family: Family, mu):
    """Canonical link, the inverse of ``mean``."""
    mu = np.asarray(mu, dtype=float)
    if family is Family.GAUSSIAN:
        return mu
    if family is Family.BERNOULLI:
        return logit(mu)
    return np.log(mu)


def working_response(family: Family, y):
    """Link-transformed observations with clipping at the support boundary."""
    y = np.asarray(y, dtype=float)
    if family is Family.BERNOULLI:
        return logit(np.clip(y, BERNOULLI_CLIP, 1.0 - BERNOULLI_CLIP))
    if family is Family.POISSON:
        return np.log(np.maximum(y, POISSON_FLOOR))
    return y


def _log_normalizer(family: Family, y, phi):
    """c(y; phi)."""
    if family is Family.GAUSSIAN:
        return -(y**2) / (2.0 * phi) - 0.5 * (LOG_2PI + np.log(phi))
    if family is Family.BERNOULLI:
        return np.zeros_like(y)
    return -gammaln(y + 1.0)


def _log_density_array(family: Family, y, theta, phi):
    a_phi = phi if family is Family.GAUSSIAN else 1.0
    return (y * theta - cumulant(family, theta)) / a_phi + _log_normalizer(
        family, y, a_phi
    )


def log_density(family: Family, y: float, theta: float, phi: float = 1.0) -> float:
    """
    Log density/mass of one observation.

    Args:
        family: Outcome family
        y: Observation
        theta: Natural parameter
        phi: Dispersion (ignored for Bernoulli and Poisson)

    Returns:
        log f(y; theta, phi)

    Raises:
        ArgumentError: If phi <= 0
        DomainError: If y is outside the family's support
    """
    _check_phi(phi)
    check_support(family, y)
    value = _log_density_array(family, np.float64(y), np.float64(theta), float(phi))
    return float(value)


def variance_bound(family: Family, phi: float, theta_max: float = 0.0) -> float:
    """
    Upper bound on b''(theta)/a(phi) used as the majorizer curvature.

    Args:
        family: Outcome family
        phi: Dispersion
        theta_max: Largest linear predictor in the column (Poisson only)

    Returns:
        Curvature bound for the column
    """
    if family is Family.GAUSSIAN:
        return 1.0 / phi
    if family is Family.BERNOULLI:
        return 0.25
    return float(np.exp(min(theta_max, THETA_CLIP)))


def _validate_shapes(Y, Theta, families, phi, W=None):
    Y = np.asarray(Y, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    if Y.ndim != 2 or Y.shape != Theta.shape:
        raise ArgumentError(f"Y {Y.shape} and Theta {Theta.shape} must be equal 2-D shapes")
    if len(families) != Y.shape[1]:
        raise ArgumentError(f"{len(families)} families for {Y.shape[1]} columns")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (Y.shape[1],):
        raise ArgumentError(f"phi must have length {Y.shape[1]}")
    if W is not None:
        W = np.asarray(W, dtype=float)
        if W.shape != Y.shape:
            raise ArgumentError(f"W {W.shape} does not match Y {Y.shape}")
        if np.any(W < 0):
            raise ArgumentError("weights must be non-negative")
    return Y, Theta, phi, W


def loglik_matrix(Y, Theta, families: Sequence[Family], phi) -> np.ndarray:
    """Cell-wise log-likelihood matrix for column-wise families."""
    Y, Theta, phi, _ = _validate_shapes(Y, Theta, families, phi)
    _check_phi(phi)
    out = np.empty_like(Y)
    for family in set(families):
        cols = np.array([f is family for f in families])
        out[:, cols] = _log_density_array(family, Y[:, cols], Theta[:, cols], phi[cols])
    return out


def mean_matrix(Theta, families: Sequence[Family]) -> np.ndarray:
    """Column-wise canonical means of a natural-parameter matrix."""
    Theta = np.asarray(Theta, dtype=float)
    out = np.empty_like(Theta)
    for family in set(families):
        cols = np.array([f is family for f in families])
        out[:, cols] = mean(family, Theta[:, cols])
    return out


def working_response_matrix(Y, families: Sequence[Family]) -> np.ndarray:
    """Column-wise working responses of an outcome matrix."""
    Y = np.asarray(Y, dtype=float)
    out = np.empty_like(Y)
    for family in set(families):
        cols = np.array([f is family for f in families])
        out[:, cols] = working_response(family, Y[:, cols])
    return out


def weighted_negloglik(Y, Theta, families: Sequence[Family], phi, W) -> float:
    """
    Weighted negative log-likelihood -sum w_ik * l_k(theta_ik, phi_k; y_ik).

    Args:
        Y: n x q outcomes
        Theta: n x q natural parameters
        families: Family per column
        phi: Dispersion per column
        W: n x q non-negative weights

    Returns:
        Scalar objective contribution

    Raises:
        ArgumentError: On shape mismatch or negative weights
    """
    Y, Theta, phi, W = _validate_shapes(Y, Theta, families, phi, W)
    if Y.size == 0:
        return 0.0
    ll = loglik_matrix(Y, Theta, families, phi)
    contrib = np.where(W == 0.0, 0.0, W * ll)
    return float(-np.sum(contrib))
