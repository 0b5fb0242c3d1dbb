"""Column-wise generalized linear model baselines fitted by IRLS."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from ..config import FitConfig
from ..expfam import THETA_CLIP, Family, link, mean, weighted_negloglik
from ..linalg import pinv
from ..utils.error_handler import ArgumentError, ConvergenceWarning, DegenerateInputError, warn
from .base import Dataset, Estimator, ModelParams

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-10
DISPERSION_FLOOR = 1e-8


@dataclass
class GlmFit:
    """Result of a single-response GLM fit."""

    coef: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    separated: bool = False
    dispersion: float = 1.0
    std_errors: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)


def _active_columns(X: np.ndarray) -> np.ndarray:
    """Columns with non-zero range; constant columns get coefficient 0."""
    if X.shape[0] == 0:
        return np.zeros(X.shape[1], dtype=bool)
    return np.ptp(X, axis=0) > 0


def _design(X: np.ndarray, active: np.ndarray, fit_intercept: bool) -> np.ndarray:
    cols = [X[:, active]]
    if fit_intercept:
        cols.insert(0, np.ones((X.shape[0], 1)))
    return np.hstack(cols)


def _unpack(beta: np.ndarray, active: np.ndarray, fit_intercept: bool):
    coef = np.zeros(active.shape[0])
    offset = 1 if fit_intercept else 0
    coef[active] = beta[offset:]
    intercept = float(beta[0]) if fit_intercept else 0.0
    return coef, intercept


def _irls(
    D: np.ndarray,
    y: np.ndarray,
    family: Family,
    weights: np.ndarray,
    beta: np.ndarray,
    max_iters: int,
    tolerance: float,
):
    converged = False
    separated = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        eta = D @ beta
        mu = mean(family, eta)
        var = mu * (1.0 - mu) if family is Family.BERNOULLI else mu
        w = np.maximum(weights * var, WEIGHT_FLOOR)
        z = eta + weights * (y - mu) / w
        sw = np.sqrt(w)
        beta_new = scipy.linalg.lstsq(D * sw[:, None], z * sw, lapack_driver="gelsd")[0]
        delta = np.max(np.abs(beta_new - beta), initial=0.0)
        beta = beta_new
        if np.max(np.abs(D @ beta), initial=0.0) > THETA_CLIP:
            separated = True
            break
        if delta <= tolerance * (1.0 + np.max(np.abs(beta), initial=0.0)):
            converged = True
            break
    return beta, converged, separated, iterations


def _std_errors(D: np.ndarray, family: Family, weights: np.ndarray, beta: np.ndarray):
    mu = mean(family, D @ beta)
    var = mu * (1.0 - mu) if family is Family.BERNOULLI else mu
    info = D.T @ (D * (weights * var)[:, None])
    return np.sqrt(np.maximum(np.diag(pinv(info)), 0.0))


def _fit_irls(
    X: np.ndarray,
    y: np.ndarray,
    family: Family,
    max_iters: int,
    tolerance: float,
    fit_intercept: bool,
    weights: Optional[np.ndarray],
) -> GlmFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ArgumentError(f"X {X.shape} and y {y.shape} are not conformable")
    weights = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)

    active = _active_columns(X)
    D = _design(X, active, fit_intercept)
    beta = np.zeros(D.shape[1])
    if fit_intercept:
        ybar = np.average(y, weights=weights) if weights.sum() > 0 else np.mean(y)
        clipped = np.clip(ybar, 1e-3, 1 - 1e-3) if family is Family.BERNOULLI else max(ybar, 1e-3)
        beta[0] = float(link(family, clipped))

    beta, converged, separated, iterations = _irls(
        D, y, family, weights, beta, max_iters, tolerance
    )
    coef, intercept = _unpack(beta, active, fit_intercept)
    fit = GlmFit(
        coef=coef,
        intercept=intercept,
        converged=converged,
        iterations=iterations,
        separated=separated,
    )
    if separated:
        fit.notes.append("linear predictor exceeded clip; data look separated")
        warn(
            f"{family.value} GLM stopped after {iterations} iterations: quasi-complete separation",
            ConvergenceWarning,
        )
    elif not converged and max_iters > 0:
        warn(f"{family.value} GLM did not converge in {max_iters} iterations", ConvergenceWarning)
    if not separated:
        se = _std_errors(D, family, weights, beta)
        fit.std_errors, _ = _unpack(se, active, fit_intercept)
    return fit


def fit_glm_logistic(
    X: np.ndarray,
    y: np.ndarray,
    max_iters: int = 100,
    tolerance: float = 1e-8,
    fit_intercept: bool = True,
    weights: Optional[np.ndarray] = None,
) -> GlmFit:
    """
    Maximum-likelihood logistic regression by IRLS.

    Args:
        X: n x p features
        y: n binary labels
        max_iters: IRLS iteration cap
        tolerance: Relative coefficient-change tolerance
        fit_intercept: Include an unpenalized intercept
        weights: Optional non-negative observation weights

    Returns:
        GlmFit; ``separated`` and ``converged=False`` flag separation

    Raises:
        DegenerateInputError: If y contains a single class
    """
    y = np.asarray(y, dtype=float)
    if np.unique(y).size < 2:
        raise DegenerateInputError("logistic regression needs both classes in y")
    return _fit_irls(X, y, Family.BERNOULLI, max_iters, tolerance, fit_intercept, weights)


def fit_glm_poisson(
    X: np.ndarray,
    y: np.ndarray,
    max_iters: int = 100,
    tolerance: float = 1e-8,
    fit_intercept: bool = True,
    weights: Optional[np.ndarray] = None,
) -> GlmFit:
    """Log-linear Poisson regression by IRLS."""
    y = np.asarray(y, dtype=float)
    if np.all(y == 0):
        raise DegenerateInputError("Poisson regression needs at least one positive count")
    return _fit_irls(X, y, Family.POISSON, max_iters, tolerance, fit_intercept, weights)


def fit_glm_gaussian(
    X: np.ndarray,
    y: np.ndarray,
    fit_intercept: bool = True,
    weights: Optional[np.ndarray] = None,
) -> GlmFit:
    """Weighted least squares with the MLE dispersion."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    weights = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    active = _active_columns(X)
    D = _design(X, active, fit_intercept)
    sw = np.sqrt(weights)
    beta = scipy.linalg.lstsq(D * sw[:, None], y * sw, lapack_driver="gelsd")[0]
    resid = y - D @ beta
    total = weights.sum()
    dispersion = float(np.sum(weights * resid**2) / total) if total > 0 else 1.0
    coef, intercept = _unpack(beta, active, fit_intercept)
    return GlmFit(
        coef=coef,
        intercept=intercept,
        converged=True,
        iterations=1,
        dispersion=max(dispersion, DISPERSION_FLOOR),
    )


def fit_glm_columns(ds: Dataset, cfg: FitConfig) -> ModelParams:
    """
    Separate GLM per outcome column, packed as a full-rank ModelParams.

    A holds the p x q coefficient matrix, B = I_q and rank = q, so
    ``params.C`` and ``predict`` work unchanged.

    Raises:
        DegenerateInputError: If a primary column has a single class
    """
    W, _ = cfg.weights(ds.n, ds.n1, ds.q)
    C = np.zeros((ds.p, ds.q))
    mu = np.zeros(ds.q)
    phi = np.ones(ds.q)
    converged = True
    iterations = 0
    max_iters = min(cfg.max_iters, 100) if cfg.max_iters > 0 else 0

    for k, family in enumerate(ds.families):
        y = ds.Y[:, k]
        try:
            if family is Family.GAUSSIAN:
                fit = fit_glm_gaussian(ds.X, y, cfg.fit_intercept, W[:, k])
            elif family is Family.BERNOULLI:
                fit = fit_glm_logistic(ds.X, y, max_iters, 1e-8, cfg.fit_intercept, W[:, k])
            else:
                fit = fit_glm_poisson(ds.X, y, max_iters, 1e-8, cfg.fit_intercept, W[:, k])
        except DegenerateInputError:
            if k < ds.q0:
                raise
            logger.warning(
                f"Surrogate column {ds.outcome_names[k]} is degenerate; using intercept-only fit"
            )
            level = np.clip(np.mean(y), 1e-3, 1 - 1e-3) if family is Family.BERNOULLI else max(np.mean(y), 1e-3)
            fit = GlmFit(
                coef=np.zeros(ds.p),
                intercept=float(link(family, level)) if cfg.fit_intercept else 0.0,
                converged=True,
                iterations=0,
            )
        C[:, k] = fit.coef
        mu[k] = fit.intercept
        phi[k] = fit.dispersion
        converged = converged and fit.converged
        iterations = max(iterations, fit.iterations)

    params = ModelParams(
        A=C,
        B=np.eye(ds.q),
        mu=mu,
        Ltilde=np.zeros((0, ds.q)),
        phi=phi,
        rank=ds.q,
        converged=converged,
        iterations=iterations,
    )
    params.objective_trace = [
        weighted_negloglik(ds.Y, params.theta(ds.X), ds.families, phi, W)
    ]
    logger.info(
        f"GLM columns fitted: q={ds.q}, converged={converged}, objective={params.objective_trace[-1]:.6g}"
    )
    return params


class GlmEstimator(Estimator):
    """Separate GLM per outcome; ignores rank, lambda and single records."""

    def __init__(self):
        super().__init__("glm")

    def fit(self, ds: Dataset, cfg: FitConfig) -> ModelParams:
        return fit_glm_columns(ds.without_single_records(), cfg)
