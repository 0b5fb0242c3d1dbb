"""HiRRR objective: weighted supervised loss plus lambda-weighted autoencoder loss."""

from ..config import FitConfig
from ..expfam import weighted_negloglik
from .base import Dataset, ModelParams


def hirrr_objective(ds: Dataset, params: ModelParams, cfg: FitConfig) -> float:
    """
    Evaluate -sum w l(theta; y) - lambda * sum w~ l(theta~; y~).

    Args:
        ds: Data the parameters refer to
        params: Fitted or candidate parameters
        cfg: Supplies lambda and the weights

    Returns:
        Objective value (lower is better)
    """
    W, Wt = cfg.weights(ds.n, ds.n1, ds.q)
    value = weighted_negloglik(ds.Y, params.theta(ds.X), ds.families, params.phi, W)
    if cfg.lambda_ > 0 and ds.n1 > 0:
        value += cfg.lambda_ * weighted_negloglik(
            ds.Ytilde, params.theta_tilde(), ds.families, params.phi, Wt
        )
    return value
