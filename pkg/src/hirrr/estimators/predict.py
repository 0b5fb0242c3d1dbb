"""Prediction on new feature rows and standardized coefficients."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..expfam import Family, mean_matrix
from ..utils.error_handler import ArgumentError
from .base import ModelParams


@dataclass
class Prediction:
    """Natural parameters, means and primary-outcome scores for m rows."""

    theta: np.ndarray
    means: np.ndarray
    primary_scores: np.ndarray


def predict(
    params: ModelParams, Xnew: np.ndarray, families: Sequence[Family], q0: int = 1
) -> Prediction:
    """
    Evaluate Θ = 1μᵀ + Xnew A Bᵀ and the column-wise means.

    Args:
        params: Fitted parameters
        Xnew: m x p feature rows
        families: Family per outcome column
        q0: Number of primary outcomes

    Returns:
        Prediction; ``primary_scores`` is the m x q0 block of means

    Raises:
        ArgumentError: If Xnew does not have p columns
    """
    Xnew = np.asarray(Xnew, dtype=float)
    if Xnew.ndim != 2 or Xnew.shape[1] != params.p:
        raise ArgumentError(f"Xnew has shape {Xnew.shape}, expected (m, {params.p})")
    if len(families) != params.q:
        raise ArgumentError(f"{len(families)} families for {params.q} outcomes")
    theta = params.theta(Xnew)
    means = mean_matrix(theta, [Family.parse(f) for f in families])
    return Prediction(theta=theta, means=means, primary_scores=means[:, :q0])


def standardized_coefficients(params: ModelParams, feature_sd: np.ndarray) -> np.ndarray:
    """Entry (j, k) is C_jk times the standard deviation of feature j."""
    sd = np.asarray(feature_sd, dtype=float)
    if sd.shape != (params.p,):
        raise ArgumentError(f"feature_sd must have length {params.p}")
    if np.any(sd < 0):
        raise ArgumentError("feature standard deviations must be non-negative")
    out = params.C * sd[:, None]
    out[sd == 0] = 0.0
    return out
