"""Classification metrics, estimation errors, trimmed aggregation and tests.

All functions are pure and operate on numpy arrays.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import false_discovery_control, hypergeom, rankdata

from .utils.error_handler import ArgumentError, DegenerateInputError, UndefinedMetricError

logger = logging.getLogger(__name__)

FISHER_SLACK = 1e-7


@dataclass
class MetricsReport:
    """One evaluation row; absent metrics are None."""

    auc: Optional[float] = None
    prauc: Optional[float] = None
    sens_at_90: Optional[float] = None
    ppv_at_90: Optional[float] = None
    sens_at_95: Optional[float] = None
    ppv_at_95: Optional[float] = None
    er_beta: Optional[float] = None
    er_c: Optional[float] = None
    er_u: Optional[float] = None
    er_v: Optional[float] = None
    er_d: Optional[float] = None
    pred_beta: Optional[float] = None
    pred_c: Optional[float] = None

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_row(self) -> List[str]:
        """CSV cells in field order; absent values are empty strings."""
        return ["" if v is None else repr(float(v)) for v in asdict(self).values()]

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "MetricsReport":
        return cls(**{k: (float(row[k]) if row.get(k) not in (None, "") else None) for k in cls.columns()})

    def present(self) -> Dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _binary_inputs(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape:
        raise ArgumentError(f"scores {scores.shape} and labels {labels.shape} differ")
    if not np.all((labels == 0) | (labels == 1)):
        raise ArgumentError("labels must be 0 or 1")
    return scores, labels.astype(bool)


def _require_both_classes(labels: np.ndarray, metric: str) -> None:
    if labels.all() or not labels.any():
        raise UndefinedMetricError(f"{metric} needs both classes in labels")


def auc(scores, labels) -> float:
    """
    Probability that a random positive outscores a random negative.

    Ties earn half credit; computed from midranks.

    Raises:
        UndefinedMetricError: If labels hold a single class
    """
    scores, labels = _binary_inputs(scores, labels)
    _require_both_classes(labels, "AUC")
    ranks = rankdata(scores)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def prauc(scores, labels) -> float:
    """
    Average precision: recall increments times precision at each distinct
    threshold, without interpolation.

    Raises:
        UndefinedMetricError: If there are no positives
    """
    scores, labels = _binary_inputs(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PRAUC needs at least one positive label")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    predicted = np.arange(1, s.size + 1)
    # last index of each block of tied scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp_at = tp[ends]
    precision = tp_at / predicted[ends]
    recall_gain = np.diff(np.r_[0, tp_at]) / n_pos
    return float(np.sum(recall_gain * precision))


def sensitivity_ppv_at_specificity(
    scores, labels, specificity: float
) -> Tuple[float, float, float]:
    """
    Sensitivity and PPV at the smallest threshold reaching a specificity.

    The threshold is the smallest candidate value (observed scores, then
    +inf) such that the fraction of negatives strictly below it is at least
    ``specificity``; a case is called positive when its score is at or above
    the threshold. PPV is 0 when nothing is called positive.

    Returns:
        (sensitivity, ppv, threshold)

    Raises:
        ArgumentError: If specificity is not in (0, 1)
        UndefinedMetricError: If labels hold a single class
    """
    if not 0.0 < specificity < 1.0:
        raise ArgumentError(f"specificity must be in (0, 1), got {specificity}")
    scores, labels = _binary_inputs(scores, labels)
    _require_both_classes(labels, "sensitivity at specificity")
    negatives = np.sort(scores[~labels])
    candidates = np.r_[np.unique(scores), np.inf]
    frac_below = np.searchsorted(negatives, candidates, side="left") / negatives.size
    threshold = float(candidates[np.argmax(frac_below >= specificity - 1e-12)])

    called = scores >= threshold
    tp = int(np.sum(called & labels))
    sensitivity = tp / int(labels.sum())
    n_called = int(called.sum())
    ppv = tp / n_called if n_called else 0.0
    return float(sensitivity), float(ppv), threshold


def classification_report(scores, labels) -> MetricsReport:
    """AUC, PRAUC and sensitivity/PPV at 90% and 95% specificity."""
    sens90, ppv90, _ = sensitivity_ppv_at_specificity(scores, labels, 0.90)
    sens95, ppv95, _ = sensitivity_ppv_at_specificity(scores, labels, 0.95)
    return MetricsReport(
        auc=auc(scores, labels),
        prauc=prauc(scores, labels),
        sens_at_90=sens90,
        ppv_at_90=ppv90,
        sens_at_95=sens95,
        ppv_at_95=ppv95,
    )


def _rank_r_svd(C: np.ndarray, r: int):
    U, s, Vt = scipy.linalg.svd(C, full_matrices=False, lapack_driver="gesvd")
    return U[:, :r], s[:r], Vt[:r].T


def estimation_errors(
    C_hat: np.ndarray, C_true: np.ndarray, r: int
) -> Tuple[float, float, float, float, float]:
    """
    Coefficient and subspace estimation errors.

    Returns:
        (er_beta, er_c, er_u, er_v, er_d) where beta is column 0 of C and the
        U/V errors compare rank-r projectors, so they are rotation invariant
    """
    C_hat = np.asarray(C_hat, dtype=float)
    C_true = np.asarray(C_true, dtype=float)
    if C_hat.shape != C_true.shape:
        raise ArgumentError(f"C_hat {C_hat.shape} and C_true {C_true.shape} differ")
    p, q = C_true.shape
    if not 1 <= r <= min(p, q):
        raise ArgumentError(f"r={r} must lie in [1, {min(p, q)}]")

    er_beta = float(np.sum((C_hat[:, 0] - C_true[:, 0]) ** 2) / p)
    er_c = float(np.sum((C_hat - C_true) ** 2) / (p * q))
    U_hat, d_hat, V_hat = _rank_r_svd(C_hat, r)
    U, d, V = _rank_r_svd(C_true, r)
    er_u = float(np.linalg.norm(U_hat @ U_hat.T - U @ U.T, "fro") ** 2 / r)
    er_v = float(np.linalg.norm(V_hat @ V_hat.T - V @ V.T, "fro") ** 2 / r)
    er_d = float(np.sum((d_hat - d) ** 2) / r)
    return er_beta, er_c, er_u, er_v, er_d


def prediction_errors(X: np.ndarray, C_hat: np.ndarray, C_true: np.ndarray) -> Tuple[float, float]:
    """(‖Xβ − Xβ̂‖²/n, ‖XC − XĈ‖²_F/(nq)) with beta the first column."""
    X = np.asarray(X, dtype=float)
    D = X @ (np.asarray(C_true, dtype=float) - np.asarray(C_hat, dtype=float))
    n, q = D.shape
    return float(np.sum(D[:, 0] ** 2) / n), float(np.sum(D**2) / (n * q))


def trimmed_mean_se(values, trim: float = 0.10) -> Tuple[float, float]:
    """
    Trimmed mean and standard error of the retained values.

    Drops floor(trim*m) values from each tail after sorting.

    Raises:
        DegenerateInputError: If fewer than 3 values remain
    """
    if not 0.0 <= trim < 0.5:
        raise ArgumentError(f"trim must be in [0, 0.5), got {trim}")
    v = np.sort(np.asarray(values, dtype=float).ravel())
    k = int(math.floor(trim * v.size + 1e-9))
    kept = v[k : v.size - k]
    if kept.size < 3:
        raise DegenerateInputError(f"{kept.size} values left after trimming; need at least 3")
    se = float(np.std(kept, ddof=1) / np.sqrt(kept.size))
    return float(np.mean(kept)), se


def fisher_exact(table) -> float:
    """
    Two-sided Fisher exact test on a 2x2 table of counts.

    Sums the hypergeometric probabilities of all tables with the observed
    margins whose probability does not exceed the observed one.

    Raises:
        ArgumentError: If the table is not 2x2 non-negative integers
        UndefinedMetricError: If any margin is zero
    """
    t = np.asarray(table)
    if t.shape != (2, 2) or np.any(t < 0) or np.any(t != np.floor(t)):
        raise ArgumentError(f"expected a 2x2 table of non-negative counts, got {table!r}")
    t = t.astype(int)
    rows = t.sum(axis=1)
    cols = t.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise UndefinedMetricError("Fisher test undefined with a zero margin")
    total = int(t.sum())
    lo = max(0, rows[0] + cols[0] - total)
    hi = min(rows[0], cols[0])
    support = np.arange(lo, hi + 1)
    pmf = hypergeom.pmf(support, total, cols[0], rows[0])
    observed = hypergeom.pmf(t[0, 0], total, cols[0], rows[0])
    p = float(np.sum(pmf[pmf <= observed * (1.0 + FISHER_SLACK)]))
    return min(p, 1.0)


def bh_adjust(p_values) -> np.ndarray:
    """
    Benjamini-Hochberg step-up adjusted p-values in input order.

    Raises:
        ArgumentError: If any p-value lies outside [0, 1]
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        return p
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ArgumentError("p-values must lie in [0, 1]")
    return np.minimum(false_discovery_control(p, method="bh"), 1.0)
