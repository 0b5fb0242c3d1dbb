"""Risk-factor tables and the uniquely-identified-cases comparison."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .cohort import exposure_table, log_odds_ratio
from .estimators.base import ModelParams
from .estimators.predict import standardized_coefficients
from .metrics import bh_adjust, fisher_exact
from .utils.error_handler import ArgumentError, UndefinedMetricError

logger = logging.getLogger(__name__)


class FactorDirection(str, Enum):
    """Sort order of a factor table."""

    RISK = "risk"
    PROTECTIVE = "protective"


@dataclass
class FactorRow:
    feature: str
    mean: float
    sd: float
    case_prevalence: Optional[float] = None
    control_prevalence: Optional[float] = None
    log_or: Optional[float] = None


FACTOR_COLUMNS = ["feature", "mean", "sd", "case_prevalence", "control_prevalence", "log_or"]


def rank_factors(
    fits: Sequence[ModelParams],
    feature_sd: np.ndarray,
    direction: FactorDirection,
    top_k: int,
    feature_names: Sequence[str],
    X: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
) -> List[FactorRow]:
    """
    Rank features by the primary-outcome standardized coefficient averaged
    over fits.

    Args:
        fits: Fitted parameters sharing one feature space
        feature_sd: p-vector, or one p-vector per fit
        direction: RISK sorts descending, PROTECTIVE ascending
        top_k: Rows to return
        feature_names: p names
        X, labels: Optional binary data for prevalence and log odds ratio

    Returns:
        Up to top_k FactorRow entries

    Raises:
        ArgumentError: On empty input or mismatched feature spaces
    """
    if not fits:
        raise ArgumentError("rank_factors needs at least one fit")
    p = fits[0].p
    if any(f.p != p for f in fits) or len(feature_names) != p:
        raise ArgumentError("fits and feature names must share one feature space")
    sd = np.asarray(feature_sd, dtype=float)
    sds = np.broadcast_to(sd, (len(fits), p)) if sd.shape == (p,) else sd
    if sds.shape != (len(fits), p):
        raise ArgumentError(f"feature_sd has shape {sd.shape}, expected ({p},) or ({len(fits)}, {p})")

    coefs = np.array([standardized_coefficients(f, s)[:, 0] for f, s in zip(fits, sds)])
    mean = coefs.mean(axis=0)
    spread = coefs.std(axis=0, ddof=1) if len(fits) > 1 else np.zeros(p)
    key = -mean if FactorDirection(direction) is FactorDirection.RISK else mean
    order = np.lexsort((np.arange(p), key))[:top_k]

    rows = []
    for j in order:
        row = FactorRow(feature=feature_names[j], mean=float(mean[j]), sd=float(spread[j]))
        if X is not None and labels is not None:
            x = np.asarray(X)[:, j]
            y = np.asarray(labels).astype(bool)
            row.case_prevalence = float(x[y].mean()) if y.any() else None
            row.control_prevalence = float(x[~y].mean()) if (~y).any() else None
            if np.all((x == 0) | (x == 1)):
                row.log_or = log_odds_ratio(exposure_table(x, y))
        rows.append(row)
    logger.info(f"Ranked {p} factors over {len(fits)} fits ({FactorDirection(direction).value})")
    return rows


def flag_top(scores: np.ndarray, top_fraction: float) -> np.ndarray:
    """Boolean mask of the ceil(top_fraction * n) highest scores; ties by index."""
    scores = np.asarray(scores, dtype=float)
    k = int(math.ceil(top_fraction * scores.size - 1e-9))
    order = np.lexsort((np.arange(scores.size), -scores))
    mask = np.zeros(scores.size, dtype=bool)
    mask[order[:k]] = True
    return mask


@dataclass
class UniqueCaseRow:
    feature: str
    exposed_both: int
    n_both: int
    exposed_only_b: int
    n_only_b: int
    p_value: float
    p_adjusted: float


UNIQUE_CASE_COLUMNS = [
    "feature", "exposed_both", "n_both", "exposed_only_b", "n_only_b", "p_value", "p_adjusted",
]


@dataclass
class UniqueCaseComparison:
    """True positives found by both models versus only by model B."""

    n_both: int
    n_only_b: int
    rows: List[UniqueCaseRow] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.rows


def compare_unique_cases(
    scores_a: np.ndarray,
    scores_b: np.ndarray,
    labels: np.ndarray,
    features: np.ndarray,
    feature_names: Sequence[str],
    top_fraction: float = 0.10,
) -> UniqueCaseComparison:
    """
    Contrast feature exposure between cases both models flag and cases only
    model B flags, with Fisher p-values and BH adjustment.

    Each model flags the top ``top_fraction`` of patients. An empty group
    yields an empty table.

    Raises:
        ArgumentError: On mismatched lengths or a fraction outside (0, 1]
    """
    scores_a = np.asarray(scores_a, dtype=float)
    scores_b = np.asarray(scores_b, dtype=float)
    labels = np.asarray(labels).astype(bool)
    features = np.asarray(features)
    n = labels.size
    if scores_a.shape != (n,) or scores_b.shape != (n,) or features.shape[0] != n:
        raise ArgumentError("scores, labels and features must describe the same patients")
    if len(feature_names) != features.shape[1]:
        raise ArgumentError("feature names do not match the feature matrix")
    if not 0.0 < top_fraction <= 1.0:
        raise ArgumentError(f"top_fraction must be in (0, 1], got {top_fraction}")

    flagged_a = flag_top(scores_a, top_fraction)
    flagged_b = flag_top(scores_b, top_fraction)
    both = flagged_a & flagged_b & labels
    only_b = flagged_b & ~flagged_a & labels
    result = UniqueCaseComparison(n_both=int(both.sum()), n_only_b=int(only_b.sum()))
    if result.n_both == 0 or result.n_only_b == 0:
        logger.warning(
            f"Unique-case comparison has an empty group (both={result.n_both}, only_b={result.n_only_b})"
        )
        return result

    p_values = []
    counts = []
    for j in range(features.shape[1]):
        x = features[:, j].astype(bool)
        e_both, e_only = int(np.sum(x & both)), int(np.sum(x & only_b))
        table = [[e_both, result.n_both - e_both], [e_only, result.n_only_b - e_only]]
        try:
            p = fisher_exact(table)
        except UndefinedMetricError:
            p = 1.0
        p_values.append(p)
        counts.append((e_both, e_only))
    adjusted = bh_adjust(p_values)
    for j in np.lexsort((np.arange(len(p_values)), p_values)):
        e_both, e_only = counts[j]
        result.rows.append(
            UniqueCaseRow(
                feature=feature_names[j],
                exposed_both=e_both,
                n_both=result.n_both,
                exposed_only_b=e_only,
                n_only_b=result.n_only_b,
                p_value=float(p_values[j]),
                p_adjusted=float(adjusted[j]),
            )
        )
    return result


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def factor_table_rows(rows: Sequence[FactorRow]) -> List[List[str]]:
    return [FACTOR_COLUMNS] + [[_cell(getattr(r, c)) for c in FACTOR_COLUMNS] for r in rows]


def unique_case_table_rows(result: UniqueCaseComparison) -> List[List[str]]:
    return [UNIQUE_CASE_COLUMNS] + [[_cell(getattr(r, c)) for c in UNIQUE_CASE_COLUMNS] for r in result.rows]
