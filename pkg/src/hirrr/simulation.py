"""Synthetic reduced-rank data, replication harness and n1 scaling runs."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import expit, logit

from .config import ModelSpec, Scenario, ScenarioSpec
from .estimators.base import Dataset
from .estimators.predict import predict
from .expfam import Family
from .metrics import (
    MetricsReport,
    classification_report,
    estimation_errors,
    prediction_errors,
    trimmed_mean_se,
)
from .model_selection import fit_model
from .utils.error_handler import ArgumentError, CalibrationError, HirrrError

logger = logging.getLogger(__name__)

PREVALENCE_TOLERANCE = 0.002
MAX_BRACKET_EXPANSIONS = 60


@dataclass
class GroundTruth:
    """True coefficients of a generated instance; C = A Bᵀ with B orthonormal."""

    C: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    Ltilde_true: np.ndarray
    A: np.ndarray
    B: np.ndarray


def derived_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def _coefficients(spec: ScenarioSpec, rng: np.random.Generator):
    C1 = rng.standard_normal((spec.p, spec.r))
    C2 = rng.standard_normal((spec.r, spec.q))
    C = spec.b * (C1 @ C2)
    top = int(np.argmax(np.linalg.norm(C, axis=0)))
    order = [top] + [k for k in range(spec.q) if k != top]
    C = C[:, order]
    U, s, Vt = scipy.linalg.svd(C, full_matrices=False)
    B = Vt[: spec.r].T
    A = U[:, : spec.r] * s[: spec.r]
    return C, A, B


def calibrate_intercept(spec: ScenarioSpec, beta: np.ndarray, seed: Optional[int] = None) -> float:
    """
    Intercept mu1 with Monte Carlo prevalence within 0.002 of the target.

    With x ~ N(0, I), xᵀbeta ~ N(0, ‖beta‖²), so the draws are taken on that
    scalar directly. The prevalence is monotone in mu1, found by bisection.

    Raises:
        ArgumentError: If the target is outside (0.001, 0.999)
        CalibrationError: If no bracket or no close enough root is found
    """
    target = spec.target_prevalence
    if not 0.001 < target < 0.999:
        raise ArgumentError(f"target prevalence {target} outside (0.001, 0.999)")
    rng = np.random.default_rng(derived_seed(spec.seed, 1) if seed is None else seed)
    scale = float(np.linalg.norm(beta))
    z = rng.standard_normal(spec.calibration_draws) * scale

    def prevalence(m: float) -> float:
        return float(np.mean(expit(m + z)))

    center = float(logit(target))
    lo, hi = center - 1.0, center + 1.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if prevalence(lo) <= target <= prevalence(hi):
            break
        width = hi - lo
        lo, hi = lo - width, hi + width
        logger.warning(f"Widening calibration bracket to [{lo:.3g}, {hi:.3g}]")
    else:
        raise CalibrationError(f"could not bracket prevalence {target}")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if prevalence(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    mu1 = 0.5 * (lo + hi)
    achieved = prevalence(mu1)
    if abs(achieved - target) > PREVALENCE_TOLERANCE:
        raise CalibrationError(f"calibrated prevalence {achieved:.4f} misses target {target}")
    logger.debug(f"Calibrated mu1={mu1:.6f} for prevalence {target} (achieved {achieved:.5f})")
    return mu1


def _outcomes(spec: ScenarioSpec, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if spec.scenario is Scenario.CONTINUOUS:
        return theta + rng.standard_normal(theta.shape)
    return (rng.random(theta.shape) < expit(theta)).astype(float)


def _families(spec: ScenarioSpec) -> List[Family]:
    family = Family.GAUSSIAN if spec.scenario is Scenario.CONTINUOUS else Family.BERNOULLI
    return [family] * spec.q


def generate(spec: ScenarioSpec) -> Tuple[Dataset, GroundTruth]:
    """
    Draw one instance: standard-normal X and X̃, C = b C1 C2 with its
    largest-norm column first, then Gaussian or Bernoulli outcomes.

    Only Ỹ of the single-record part is kept; X̃ enters through
    ``Ltilde_true = X̃ A``.
    """
    rng = np.random.default_rng(spec.seed)
    C, A, B = _coefficients(spec, rng)
    X = rng.standard_normal((spec.n, spec.p))
    Xt = rng.standard_normal((spec.n1, spec.p))

    mu = np.zeros(spec.q)
    if spec.scenario is Scenario.BINARY:
        mu[0] = calibrate_intercept(spec, C[:, 0])

    Y = _outcomes(spec, mu + X @ C, rng)
    Yt = _outcomes(spec, mu + Xt @ C, rng)
    ds = Dataset(
        X=X,
        Y=Y,
        Ytilde=Yt,
        q0=spec.q0,
        families=_families(spec),
        outcome_names=[f"y{k + 1}" for k in range(spec.q)],
    )
    truth = GroundTruth(C=C, beta=C[:, 0].copy(), mu=mu, Ltilde_true=Xt @ A, A=A, B=B)
    return ds, truth


def generate_test(spec: ScenarioSpec, truth: GroundTruth, seed: int) -> Dataset:
    """Fresh multi-record test rows from an existing ground truth."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((spec.n_test, spec.p))
    Y = _outcomes(spec, truth.mu + X @ truth.C, rng)
    return Dataset(X=X, Y=Y, Ytilde=np.zeros((0, spec.q)), q0=spec.q0, families=_families(spec))


def _evaluate(spec, params, truth, test) -> MetricsReport:
    er_beta, er_c, er_u, er_v, er_d = estimation_errors(params.C, truth.C, spec.r)
    pred_beta, pred_c = prediction_errors(test.X, params.C, truth.C)
    report = MetricsReport(
        er_beta=er_beta,
        er_c=er_c,
        er_u=er_u,
        er_v=er_v,
        er_d=er_d,
        pred_beta=pred_beta,
        pred_c=pred_c,
    )
    if spec.scenario is Scenario.BINARY:
        labels = test.Y[:, 0]
        if 0 < labels.sum() < labels.size:
            scores = predict(params, test.X, test.families, test.q0).primary_scores[:, 0]
            cls = classification_report(scores, labels)
            for name in ("auc", "prauc", "sens_at_90", "ppv_at_90", "sens_at_95", "ppv_at_95"):
                setattr(report, name, getattr(cls, name))
    return report


@dataclass
class ReplicationResult:
    """Per-replicate metrics per model with failure counts."""

    models: List[str]
    reports: Dict[str, List[Optional[MetricsReport]]]
    failures: Dict[str, int] = field(default_factory=dict)

    def table(self, trim: float = 0.10) -> List[List[str]]:
        """
        Rows ``metric, <model>_mean, <model>_sd, <model>_se`` over present metrics.

        ``sd`` is the spread of the retained replicates and ``se`` is the
        standard error of their trimmed mean.
        """
        header = ["metric"] + [f"{m}_{s}" for m in self.models for s in ("mean", "sd", "se")]
        rows = [header]
        for metric in MetricsReport.columns():
            row = [metric]
            seen = False
            for model in self.models:
                values = [
                    getattr(r, metric)
                    for r in self.reports[model]
                    if r is not None and getattr(r, metric) is not None
                ]
                if not values:
                    row += ["", "", ""]
                    continue
                seen = True
                mean, se = summarize(values, trim)
                row += [repr(mean), repr(trimmed_sd(values, trim)), repr(se)]
            if seen:
                rows.append(row)
        rows.append(["failed_reps"] + [c for m in self.models for c in (str(self.failures.get(m, 0)), "", "")])
        return rows


def summarize(values: Sequence[float], trim: float = 0.10) -> Tuple[float, float]:
    """Trimmed mean and SE, falling back to the plain mean for short runs."""
    values = np.asarray(values, dtype=float)
    try:
        return trimmed_mean_se(values, trim)
    except HirrrError:
        se = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
        return float(np.mean(values)), se


def trimmed_sd(values: Sequence[float], trim: float = 0.10) -> float:
    """Replicate standard deviation over the values ``summarize`` keeps."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    k = int(np.floor(trim * v.size + 1e-9))
    kept = v[k : v.size - k]
    if kept.size < 3:
        kept = v
    return float(np.std(kept, ddof=1)) if kept.size > 1 else 0.0


def run_replications(
    spec: ScenarioSpec, models: List[ModelSpec], reps: int, threads: int = 1
) -> ReplicationResult:
    """
    Fit every model on ``reps`` independent instances.

    Replicate i uses data seed derived from (spec.seed, i) and a test set of
    ``spec.n_test`` rows from the same ground truth. Fitter errors are
    counted and the replicate is excluded for that model.
    """
    if reps < 1:
        raise ArgumentError(f"reps must be >= 1, got {reps}")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ArgumentError(f"model names must be unique, got {names}")

    def run(rep: int) -> List[Optional[MetricsReport]]:
        rep_spec = spec.model_copy(update={"seed": derived_seed(spec.seed, rep)})
        ds, truth = generate(rep_spec)
        test = generate_test(rep_spec, truth, derived_seed(spec.seed, rep, 2))
        out: List[Optional[MetricsReport]] = []
        for model in models:
            try:
                params = fit_model(model, ds, seed=rep_spec.seed)
                out.append(_evaluate(rep_spec, params, truth, test))
            except HirrrError as e:
                logger.warning(f"Replicate {rep}, model {model.name} failed: {e}")
                out.append(None)
        logger.debug(f"Replicate {rep} done")
        return out

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_rep = list(pool.map(run, range(reps)))

    reports = {name: [row[m] for row in per_rep] for m, name in enumerate(names)}
    failures = {name: sum(r is None for r in reports[name]) for name in names}
    logger.info(f"Replications finished: {reps} reps x {len(models)} models, failures={failures}")
    return ReplicationResult(models=names, reports=reports, failures=failures)


def n1_scaling_experiment(
    spec: ScenarioSpec,
    n1_grid: Sequence[int],
    reps: int,
    lam: float = 1.0,
    threads: int = 1,
) -> List[Tuple[int, float, float]]:
    """
    Median Er(V_C) of HiRRR as the single-record sample size grows.

    Returns:
        Rows (n1, median_er_v, median_er_v * (n + lam * n1))

    Raises:
        ArgumentError: If the grid is empty, negative or not ascending
    """
    grid = [int(v) for v in n1_grid]
    if not grid or any(v < 0 for v in grid) or grid != sorted(grid):
        raise ArgumentError(f"n1 grid must be non-negative and ascending, got {list(n1_grid)}")
    model = ModelSpec(name="hirrr", estimator="hirrr", rank=spec.r, lambda_=lam)
    rows = []
    for n1 in grid:
        result = run_replications(spec.model_copy(update={"n1": n1}), [model], reps, threads)
        values = [r.er_v for r in result.reports["hirrr"] if r is not None]
        if not values:
            raise ArgumentError(f"every replicate failed at n1={n1}")
        median = float(np.median(values))
        rows.append((n1, median, median * (spec.n + lam * n1)))
        logger.info(f"n1={n1}: median Er(V)={median:.6g}")
    return rows
