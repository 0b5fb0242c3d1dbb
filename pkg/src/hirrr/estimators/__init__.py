"""Estimators: GLM baselines, reduced-rank regression and HiRRR."""

from .base import Dataset, Estimator, ModelParams, check_rank
from .bcd import fit_hirrr_binary, fit_hirrr_general, initialize
from .closed_form import fit_hirrr_gaussian
from .factory import EstimatorFactory
from .glm import GlmFit, fit_glm_columns, fit_glm_logistic
from .objective import hirrr_objective
from .predict import Prediction, predict, standardized_coefficients
from .rrr import fit_hirrr, fit_rrr, select_solver

__all__ = [
    "Dataset",
    "Estimator",
    "EstimatorFactory",
    "GlmFit",
    "ModelParams",
    "Prediction",
    "check_rank",
    "fit_glm_columns",
    "fit_glm_logistic",
    "fit_hirrr",
    "fit_hirrr_binary",
    "fit_hirrr_gaussian",
    "fit_hirrr_general",
    "fit_rrr",
    "hirrr_objective",
    "initialize",
    "predict",
    "select_solver",
    "standardized_coefficients",
]
