"""Cross-validation over (rank, lambda) grids and repeated random splits."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cohort import fisher_screen
from .config import CvCriterion, CvGrid, FitConfig, ModelSpec, SplitPlan
from .estimators.base import Dataset, ModelParams
from .estimators.factory import EstimatorFactory
from .estimators.predict import predict
from .expfam import Family, weighted_negloglik
from .metrics import MetricsReport, auc, classification_report
from .utils.error_handler import (
    ArgumentError,
    DegenerateInputError,
    DivergingPredictorError,
)

logger = logging.getLogger(__name__)

MAX_REFOLDS = 10


@dataclass
class CvResult:
    """Selected cell plus every (rank, lambda, fold, value) score."""

    best_rank: int
    best_lambda: float
    scores: List[Tuple[int, float, int, float]]
    cell_means: Dict[Tuple[int, float], float]
    criterion: CvCriterion = CvCriterion.HELD_OUT_LOGLIK

    def rows(self) -> List[List[str]]:
        return [[str(r), repr(lam), str(fold), repr(value)] for r, lam, fold, value in self.scores]


def stratified_assignment(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row with every class spread round-robin over the folds."""
    labels = np.asarray(labels)
    assignment = np.empty(labels.size, dtype=int)
    offset = 0
    for value in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == value))
        assignment[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return assignment


def _primary_is_binary(ds: Dataset) -> bool:
    return ds.families[0] is Family.BERNOULLI


def make_folds(ds: Dataset, grid: CvGrid) -> np.ndarray:
    """
    Assign multi-record rows to folds, stratified on a binary primary outcome.

    Raises:
        ArgumentError: If n < folds, or TargetAUC is requested for a
            non-binary primary outcome
        DegenerateInputError: If no valid TargetAUC folding is found
    """
    if ds.n < grid.folds:
        raise ArgumentError(f"n={ds.n} is smaller than folds={grid.folds}")
    target_auc = grid.criterion is CvCriterion.TARGET_AUC
    if target_auc and not _primary_is_binary(ds):
        raise ArgumentError("target_auc criterion needs a binary primary outcome")

    labels = ds.Y[:, 0] if _primary_is_binary(ds) else np.zeros(ds.n)
    for attempt in range(MAX_REFOLDS):
        rng = np.random.default_rng([grid.seed, attempt])
        assignment = stratified_assignment(labels, grid.folds, rng)
        if not target_auc:
            return assignment
        if all(np.unique(labels[assignment == f]).size == 2 for f in range(grid.folds)):
            return assignment
        logger.warning(f"Fold attempt {attempt + 1} left a single-class fold; refolding")
    raise DegenerateInputError(
        f"could not build {grid.folds} folds with both primary classes in {MAX_REFOLDS} attempts"
    )


def _score(
    params: ModelParams,
    val: Dataset,
    criterion: CvCriterion,
    W: Optional[np.ndarray] = None,
) -> float:
    if criterion is CvCriterion.TARGET_AUC:
        scores = predict(params, val.X, val.families, val.q0).primary_scores[:, 0]
        return auc(scores, val.Y[:, 0])
    W = np.ones_like(val.Y) if W is None else W
    loss = weighted_negloglik(val.Y, params.theta(val.X), val.families, params.phi, W)
    return -loss / val.n


def cross_validate(
    ds: Dataset,
    grid: CvGrid,
    estimator: str = "hirrr",
    base_cfg: Optional[FitConfig] = None,
    threads: int = 1,
) -> CvResult:
    """
    K-fold cross-validation over every (rank, lambda) cell.

    Folds partition the multi-record rows only; all single records join
    every training fold. The best cell maximizes the mean fold score, with
    ties going to the smaller rank and then the smaller lambda.

    Args:
        ds: Full training data
        grid: Ranks, lambdas, folds, criterion and seed
        estimator: Registered estimator name
        base_cfg: Settings shared by every fit (rank and lambda overridden;
            W is sliced to each fold, Wtilde is passed whole)
        threads: Worker threads; results do not depend on it

    Returns:
        CvResult
    """
    base_cfg = base_cfg or FitConfig()
    bad = [r for r in grid.ranks if r > min(ds.p, ds.q)]
    if bad:
        raise ArgumentError(f"ranks {bad} exceed min(p, q) = {min(ds.p, ds.q)}")
    assignment = make_folds(ds, grid)
    fitter = EstimatorFactory.create_estimator(estimator)
    cells = [(r, lam) for r in grid.ranks for lam in grid.lambdas]
    units = [(c, f) for c in range(len(cells)) for f in range(grid.folds)]

    def run(unit: Tuple[int, int]) -> float:
        cell, fold = unit
        rank, lam = cells[cell]
        train_rows = np.flatnonzero(assignment != fold)
        val_rows = np.flatnonzero(assignment == fold)
        train = ds.subset(train_rows, keep_single_records=True)
        val = ds.subset(val_rows, keep_single_records=False)
        # W follows the multi-record rows; Wtilde stays whole
        W = None if base_cfg.W is None else np.asarray(base_cfg.W, dtype=float)
        cfg = base_cfg.model_copy(
            update={
                "rank": rank,
                "lambda_": lam,
                "seed": grid.seed,
                "W": None if W is None else W[train_rows],
            }
        )
        try:
            params = fitter.fit(train, cfg)
        except DivergingPredictorError as e:
            logger.warning(f"CV fit r={rank}, lambda={lam}, fold={fold} diverged: {e}")
            return -np.inf
        return _score(params, val, grid.criterion, None if W is None else W[val_rows])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(run, units))

    scores = [
        (cells[c][0], cells[c][1], f, float(v)) for (c, f), v in zip(units, values)
    ]
    cell_means: Dict[Tuple[int, float], float] = {}
    for c, cell in enumerate(cells):
        cell_means.setdefault(cell, float(np.mean(values[c * grid.folds : (c + 1) * grid.folds])))

    best = None
    for cell in sorted(cell_means):
        if best is None or cell_means[cell] > cell_means[best]:
            best = cell
    logger.info(
        f"CV over {len(cells)} cells x {grid.folds} folds selected rank={best[0]}, "
        f"lambda={best[1]} ({grid.criterion.value}={cell_means[best]:.6g})"
    )
    return CvResult(best[0], best[1], scores, cell_means, grid.criterion)


def _prefix_columns(ds: Dataset, prefixes: Sequence[str]) -> np.ndarray:
    cols = [j for j, name in enumerate(ds.feature_names) if any(name.startswith(p) for p in prefixes)]
    if not cols:
        raise DegenerateInputError(f"no feature names start with any of {list(prefixes)}")
    return np.asarray(cols, dtype=int)


def _screen_columns(ds: Dataset, columns: np.ndarray, top_k: int) -> np.ndarray:
    X = ds.X[:, columns]
    binary = np.all((X == 0) | (X == 1), axis=0)
    kept = columns[~binary]
    if np.any(binary):
        chosen = fisher_screen(X[:, binary], ds.Y[:, 0], top_k)
        kept = np.concatenate([kept, columns[binary][chosen]])
    return np.sort(kept)


def fit_model(spec: ModelSpec, ds: Dataset, seed: int = 0, threads: int = 1) -> ModelParams:
    """
    Fit one competitor per its ModelSpec and return parameters over all of X.

    Feature restriction (``features``), Fisher screening (``screen_top_k``)
    and rank/lambda tuning (``cv``) all use ``ds`` only; excluded feature
    rows of A are zero.
    """
    columns = np.arange(ds.p)
    if spec.features is not None:
        columns = _prefix_columns(ds, spec.features)
    if spec.screen_top_k is not None and _primary_is_binary(ds):
        columns = _screen_columns(ds, columns, spec.screen_top_k)
    sub = ds if columns.size == ds.p else ds.select_features(columns)

    rank, lam = spec.rank, spec.lambda_
    if spec.cv is not None and spec.estimator in ("rrr", "hirrr"):
        grid = spec.cv
        if spec.estimator == "rrr":
            grid = grid.model_copy(update={"lambdas": [0.0]})
        result = cross_validate(sub, grid, spec.estimator, spec.to_fit_config(seed=seed), threads)
        rank, lam = result.best_rank, result.best_lambda

    cfg = spec.to_fit_config(rank=rank, lam=lam, seed=seed)
    params = EstimatorFactory.create_estimator(spec.estimator).fit(sub, cfg)
    if columns.size == ds.p:
        return params
    A = np.zeros((ds.p, params.rank))
    A[columns] = params.A
    return ModelParams(
        A=A,
        B=params.B,
        mu=params.mu,
        Ltilde=params.Ltilde,
        phi=params.phi,
        rank=params.rank,
        objective_trace=params.objective_trace,
        converged=params.converged,
        iterations=params.iterations,
    )


def stratified_split(
    labels: np.ndarray, train_fraction: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted (train, test) row indices with each class split in proportion."""
    train, test = [], []
    for value in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == value))
        k = int(round(train_fraction * idx.size))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class SplitEvaluation:
    """Per-model, per-repeat metrics and fits of a split evaluation."""

    reports: Dict[str, List[MetricsReport]]
    fits: Dict[str, List[Optional[ModelParams]]]
    flags: List[int] = field(default_factory=list)
    train_indices: List[np.ndarray] = field(default_factory=list)

    def summary(self) -> Dict[str, Dict[str, Tuple[float, float]]]:
        """Mean and standard deviation of every present metric per model."""
        out: Dict[str, Dict[str, Tuple[float, float]]] = {}
        for name, reports in self.reports.items():
            out[name] = {}
            for metric in MetricsReport.columns():
                values = [getattr(r, metric) for r in reports if getattr(r, metric) is not None]
                if not values:
                    continue
                sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                out[name][metric] = (float(np.mean(values)), sd)
        return out


def run_random_splits(
    ds: Dataset, plan: SplitPlan, models: List[ModelSpec], threads: int = 1
) -> SplitEvaluation:
    """
    Repeated stratified train/test evaluation of several models.

    Each repeat splits the multi-record rows; every model trains on the
    training part (plus all single records when the plan says so) and is
    scored on the held-out part's primary outcome. A repeat whose test set
    misses a class is resampled once and then flagged.

    Raises:
        ArgumentError: If the primary outcome is not binary or names repeat
    """
    if not _primary_is_binary(ds):
        raise ArgumentError("split evaluation needs a binary primary outcome")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ArgumentError(f"model names must be unique, got {names}")

    labels = ds.Y[:, 0]
    splits: List[Optional[Tuple[np.ndarray, np.ndarray]]] = []
    flags: List[int] = []
    for rep in range(plan.repeats):
        train, test = stratified_split(labels, plan.train_fraction, np.random.default_rng([plan.seed, rep]))
        if np.unique(labels[test]).size < 2:
            logger.warning(f"Repeat {rep}: test split has one class; resampling")
            train, test = stratified_split(
                labels, plan.train_fraction, np.random.default_rng([plan.seed, rep, 1])
            )
        if np.unique(labels[test]).size < 2:
            logger.warning(f"Repeat {rep} flagged: test split still has one class")
            flags.append(rep)
            splits.append(None)
        else:
            splits.append((train, test))

    units = [(rep, m) for rep in range(plan.repeats) for m in range(len(models))]

    def run(unit: Tuple[int, int]):
        rep, m = unit
        if splits[rep] is None:
            return MetricsReport(), None
        train, test = splits[rep]
        train_ds = ds.subset(train, keep_single_records=plan.include_all_single_records_in_training)
        params = fit_model(models[m], train_ds, seed=plan.seed + rep)
        scores = predict(params, ds.X[test], ds.families, ds.q0).primary_scores[:, 0]
        report = classification_report(scores, labels[test])
        logger.debug(f"Repeat {rep}, model {models[m].name}: AUC={report.auc:.4f}")
        return report, params

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, units))

    reports = {name: [] for name in names}
    fits = {name: [] for name in names}
    for (rep, m), (report, params) in zip(units, results):
        reports[names[m]].append(report)
        fits[names[m]].append(params)

    evaluation = SplitEvaluation(
        reports=reports,
        fits=fits,
        flags=flags,
        train_indices=[s[0] if s is not None else np.array([], dtype=int) for s in splits],
    )
    logger.info(f"Split evaluation finished: {plan.repeats} repeats, {len(models)} models, {len(flags)} flagged")
    return evaluation
