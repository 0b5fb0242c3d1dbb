"""Solver routing for HiRRR and plain reduced-rank regression."""

import logging

from ..config import FitConfig
from ..expfam import Family
from .base import Dataset, Estimator, ModelParams
from .bcd import fit_hirrr_binary, fit_hirrr_general
from .closed_form import fit_hirrr_gaussian

logger = logging.getLogger(__name__)


def select_solver(ds: Dataset, cfg: FitConfig) -> str:
    """Resolve ``cfg.solver == "auto"`` from the families and weights."""
    if cfg.solver != "auto":
        return cfg.solver
    unit = cfg.has_unit_weights()
    if unit and all(f is Family.GAUSSIAN for f in ds.families):
        return "closed_form"
    if unit and all(f is Family.BERNOULLI for f in ds.families):
        return "binary"
    return "general"


def fit_hirrr(ds: Dataset, cfg: FitConfig) -> ModelParams:
    """
    Fit HiRRR with the solver chosen by ``select_solver``.

    Args:
        ds: Training data including single records
        cfg: Fit settings

    Returns:
        Fitted ModelParams
    """
    solver = select_solver(ds, cfg)
    logger.debug(f"HiRRR solver: {solver} (n={ds.n}, n1={ds.n1}, q={ds.q}, r={cfg.rank})")
    if solver == "closed_form":
        return fit_hirrr_gaussian(ds, cfg)
    if solver == "binary":
        return fit_hirrr_binary(ds, cfg)
    return fit_hirrr_general(ds, cfg)


def fit_rrr(ds: Dataset, cfg: FitConfig) -> ModelParams:
    """
    Reduced-rank regression on the multi-record data only.

    Equivalent to HiRRR with lambda = 0; single records are dropped so
    the returned Ltilde is empty.
    """
    rrr_cfg = cfg.model_copy(update={"lambda_": 0.0, "Wtilde": None})
    return fit_hirrr(ds.without_single_records(), rrr_cfg)


class HirrrEstimator(Estimator):
    """HiRRR using both multi-record and single-record data."""

    def __init__(self):
        super().__init__("hirrr")

    def fit(self, ds: Dataset, cfg: FitConfig) -> ModelParams:
        return fit_hirrr(ds, cfg)


class RrrEstimator(Estimator):
    """Reduced-rank regression ignoring single records."""

    def __init__(self):
        super().__init__("rrr")

    def fit(self, ds: Dataset, cfg: FitConfig) -> ModelParams:
        return fit_rrr(ds, cfg)
