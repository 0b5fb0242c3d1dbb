"""Block-coordinate descent for HiRRR with mixed exponential-family outcomes.

Each sweep updates A, B, mu, Ltilde and the Gaussian dispersions in turn.
The A, mu and Ltilde blocks take gradient steps scaled by a uniform
curvature bound; B is an orthogonal Procrustes solve of the quadratic
majorizer. Every candidate is accepted only if the objective does not
increase, so the recorded trace is monotone.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..config import FitConfig
from ..expfam import (
    BERNOULLI_CLIP,
    POISSON_FLOOR,
    THETA_CLIP,
    Family,
    link,
    mean_matrix,
    variance_bound,
    weighted_negloglik,
    working_response_matrix,
)
from ..linalg import pinv, procrustes_solve, top_eigenvectors
from ..utils.error_handler import (
    ArgumentError,
    ConvergenceWarning,
    DivergingPredictorError,
    DomainError,
    warn,
)
from .base import Dataset, ModelParams, check_rank
from .closed_form import DISPERSION_FLOOR, gaussian_dispersion

logger = logging.getLogger(__name__)


@dataclass
class _State:
    A: np.ndarray
    B: np.ndarray
    mu: np.ndarray
    Ltilde: np.ndarray
    phi: np.ndarray

    def replace(self, **changes) -> "_State":
        fields = dict(A=self.A, B=self.B, mu=self.mu, Ltilde=self.Ltilde, phi=self.phi)
        fields.update(changes)
        return _State(**fields)


def _marginal_link(Y: np.ndarray, families) -> np.ndarray:
    out = np.empty(Y.shape[1])
    for k, family in enumerate(families):
        ybar = Y[:, k].mean() if Y.shape[0] else 0.0
        if family is Family.BERNOULLI:
            ybar = np.clip(ybar, BERNOULLI_CLIP, 1.0 - BERNOULLI_CLIP)
        elif family is Family.POISSON:
            ybar = max(ybar, POISSON_FLOOR)
        out[k] = float(link(family, ybar))
    return out


def initialize(ds: Dataset, cfg: FitConfig) -> ModelParams:
    """
    Warm start from a rank-r fit of the working responses.

    Only the multi-record data determine A, B and mu, so a fit with
    lambda = 0 starts exactly where the plain reduced-rank fit does.

    Args:
        ds: Training data
        cfg: Supplies rank, fit_intercept and dispersion mode

    Returns:
        Initial ModelParams with a one-element objective trace left empty
    """
    r = cfg.rank
    X = ds.X
    Z = working_response_matrix(ds.Y, ds.families)
    if cfg.fit_intercept:
        xbar = X.mean(axis=0)
        Z = Z - Z.mean(axis=0)
        Xc = X - xbar
    else:
        xbar = np.zeros(ds.p)
        Xc = X

    C_ols = pinv(Xc) @ Z
    F = Xc @ C_ols
    FtF = F.T @ F
    if not np.any(FtF):
        B0 = np.eye(ds.q)[:, :r]
    else:
        B0, _ = top_eigenvectors(0.5 * (FtF + FtF.T), r)
    A0 = C_ols @ B0

    if cfg.fit_intercept:
        mu0 = _marginal_link(ds.Y, ds.families) - B0 @ (A0.T @ xbar)
    else:
        mu0 = np.zeros(ds.q)

    Zt = working_response_matrix(ds.Ytilde, ds.families)
    Lt0 = (Zt - mu0) @ B0

    phi0 = np.ones(ds.q)
    gaussian = np.array([f is Family.GAUSSIAN for f in ds.families])
    if np.any(gaussian):
        R = ds.Y[:, gaussian] - (mu0 + X @ A0 @ B0.T)[:, gaussian]
        phi0[gaussian] = gaussian_dispersion(R, R[:0], 0.0, cfg.dispersion)

    return ModelParams(A=A0, B=B0, mu=mu0, Ltilde=Lt0, phi=phi0, rank=r, converged=False)


class BcdSolver:
    """Majorize-minimize block-coordinate descent on the HiRRR objective."""

    def __init__(self, ds: Dataset, cfg: FitConfig):
        """
        Initialize solver.

        Args:
            ds: Training data
            cfg: Fit settings
        """
        check_rank(ds, cfg.rank)
        self.ds = ds
        self.cfg = cfg
        self.W, self.Wt = cfg.weights(ds.n, ds.n1, ds.q)
        self.lam = cfg.lambda_
        self.use_single = self.lam > 0 and ds.n1 > 0
        self.X_pinv = pinv(ds.X)
        self.gaussian = np.array([f is Family.GAUSSIAN for f in ds.families])
        self.poisson = np.array([f is Family.POISSON for f in ds.families])

    # Natural parameters and objective

    def _theta(self, s: _State) -> np.ndarray:
        return s.mu[None, :] + (self.ds.X @ s.A) @ s.B.T

    def _theta_tilde(self, s: _State) -> np.ndarray:
        return s.mu[None, :] + s.Ltilde @ s.B.T

    def objective(self, s: _State) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            value = weighted_negloglik(
                self.ds.Y, self._theta(s), self.ds.families, s.phi, self.W
            )
            if self.use_single:
                value += self.lam * weighted_negloglik(
                    self.ds.Ytilde, self._theta_tilde(s), self.ds.families, s.phi, self.Wt
                )
        return value

    def _check_divergence(self, s: _State) -> None:
        if not np.any(self.poisson):
            return
        peak = np.max(np.abs(self._theta(s)[:, self.poisson]), initial=0.0)
        if self.use_single:
            peak = max(peak, np.max(np.abs(self._theta_tilde(s)[:, self.poisson]), initial=0.0))
        if peak > THETA_CLIP:
            raise DivergingPredictorError(
                f"Poisson linear predictor reached {peak:.3g}, beyond the clip at {THETA_CLIP}"
            )

    def _search(
        self, s: _State, obj: float, candidate: Callable[[float], _State]
    ) -> Tuple[_State, float]:
        """Try t = 1, 1/2, 1/4, ...; keep the first non-increasing candidate."""
        t = 1.0
        for _ in range(self.cfg.max_halvings + 1):
            new = candidate(t)
            value = self.objective(new)
            if np.isfinite(value) and value <= obj:
                self._check_divergence(new)
                return new, value
            t *= 0.5
        return s, obj

    # Gradients and curvature

    def _kappa(self, s: _State) -> np.ndarray:
        theta_max = self._theta(s).max(axis=0) if self.ds.n else np.full(self.ds.q, -np.inf)
        if self.use_single:
            theta_max = np.maximum(theta_max, self._theta_tilde(s).max(axis=0))
        return np.array(
            [
                variance_bound(f, s.phi[k], theta_max[k])
                for k, f in enumerate(self.ds.families)
            ]
        )

    def _residuals(self, s: _State) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Weighted score residuals W∘(Y − b'(Θ))/φ for both parts."""
        with np.errstate(over="ignore"):
            R = self.W * (self.ds.Y - mean_matrix(self._theta(s), self.ds.families)) / s.phi
            Rt = None
            if self.use_single:
                Rt = (
                    self.Wt
                    * (self.ds.Ytilde - mean_matrix(self._theta_tilde(s), self.ds.families))
                    / s.phi
                )
        return R, Rt

    # Block updates

    def step_A(self, s: _State, obj: float) -> Tuple[_State, float]:
        kappa = self._kappa(s)
        c = float(np.max(self.W * kappa, initial=0.0))
        if c <= 0:
            return s, obj
        R, _ = self._residuals(s)
        direction = self.X_pinv @ R @ s.B / c
        return self._search(s, obj, lambda t: s.replace(A=s.A + t * direction))

    def step_B(self, s: _State, obj: float) -> Tuple[_State, float]:
        kappa = self._kappa(s)
        R, Rt = self._residuals(s)
        Z = self.ds.X @ s.A
        c = float(np.max(self.W * kappa, initial=0.0))
        curvature = c * (s.B @ (Z.T @ Z))
        linear = R.T @ Z
        if self.use_single:
            ct = self.lam * float(np.max(self.Wt * kappa, initial=0.0))
            curvature = curvature + ct * (s.B @ (s.Ltilde.T @ s.Ltilde))
            linear = linear + self.lam * (Rt.T @ s.Ltilde)

        def candidate(t: float) -> _State:
            return s.replace(B=procrustes_solve(curvature / t + linear))

        return self._search(s, obj, candidate)

    def step_mu(self, s: _State, obj: float) -> Tuple[_State, float]:
        if not self.cfg.fit_intercept:
            return s, obj
        kappa = self._kappa(s)
        R, Rt = self._residuals(s)
        score = R.sum(axis=0)
        curvature = self.ds.n * np.max(self.W * kappa, axis=0, initial=0.0)
        if self.use_single:
            score = score + self.lam * Rt.sum(axis=0)
            curvature = curvature + self.ds.n1 * self.lam * np.max(
                self.Wt * kappa, axis=0, initial=0.0
            )
        direction = np.where(curvature > 0, score / np.where(curvature > 0, curvature, 1.0), 0.0)
        return self._search(s, obj, lambda t: s.replace(mu=s.mu + t * direction))

    def step_Ltilde(self, s: _State, obj: float) -> Tuple[_State, float]:
        if not self.use_single:
            return s, obj
        kappa = self._kappa(s)
        ct = float(np.max(self.Wt * kappa, initial=0.0))
        if ct <= 0:
            return s, obj
        _, Rt = self._residuals(s)
        direction = Rt @ s.B / ct
        return self._search(s, obj, lambda t: s.replace(Ltilde=s.Ltilde + t * direction))

    def step_phi(self, s: _State, obj: float) -> Tuple[_State, float]:
        if not np.any(self.gaussian):
            return s, obj
        g = self.gaussian
        R = (self.ds.Y - self._theta(s))[:, g]
        Rt = (self.ds.Ytilde - self._theta_tilde(s))[:, g]
        phi = s.phi.copy()
        phi[g] = gaussian_dispersion(
            R,
            Rt,
            self.lam if self.use_single else 0.0,
            self.cfg.dispersion,
            self.W[:, g],
            self.Wt[:, g],
        )
        new = s.replace(phi=np.maximum(phi, DISPERSION_FLOOR))
        value = self.objective(new)
        if np.isfinite(value) and value <= obj:
            return new, value
        return s, obj

    def run(self, init: ModelParams) -> ModelParams:
        """
        Iterate block updates until the relative objective change is below
        tolerance or ``max_iters`` sweeps have run.

        Args:
            init: Starting parameters

        Returns:
            ModelParams with the full objective trace
        """
        cfg = self.cfg
        s = _State(init.A, init.B, init.mu, init.Ltilde, init.phi)
        obj = self.objective(s)
        if not np.isfinite(obj):
            raise ArgumentError("objective is not finite at the initial point")
        trace = [obj]
        converged = False
        iterations = 0

        for iterations in range(1, cfg.max_iters + 1):
            previous = obj
            s, obj = self.step_A(s, obj)
            s, obj = self.step_B(s, obj)
            s, obj = self.step_mu(s, obj)
            s, obj = self.step_Ltilde(s, obj)
            s, obj = self.step_phi(s, obj)
            trace.append(obj)
            change = abs(obj - previous) / (abs(previous) + cfg.tolerance)
            logger.debug(f"BCD sweep {iterations}: objective={obj:.10g}, change={change:.3g}")
            if change < cfg.tolerance:
                converged = True
                break

        if not converged and cfg.max_iters > 0:
            warn(
                f"BCD stopped after {cfg.max_iters} sweeps without meeting tolerance {cfg.tolerance}",
                ConvergenceWarning,
            )

        params = ModelParams(
            A=s.A,
            B=s.B,
            mu=s.mu,
            Ltilde=s.Ltilde,
            phi=s.phi,
            rank=cfg.rank,
            objective_trace=trace,
            converged=converged,
            iterations=iterations,
        )
        logger.info(
            f"BCD finished: r={cfg.rank}, lambda={self.lam}, sweeps={iterations}, "
            f"converged={converged}, objective={obj:.6g}"
        )
        return params


def fit_hirrr_general(
    ds: Dataset, cfg: FitConfig, init: Optional[ModelParams] = None
) -> ModelParams:
    """
    HiRRR by block-coordinate descent for any mix of families.

    Args:
        ds: Training data
        cfg: Fit settings
        init: Optional starting point; defaults to ``initialize(ds, cfg)``

    Returns:
        ModelParams whose ``objective_trace`` is non-increasing

    Raises:
        ArgumentError: If the rank is out of range
        DivergingPredictorError: If a Poisson linear predictor passes the clip
    """
    solver = BcdSolver(ds, cfg)
    start = init if init is not None else initialize(ds, cfg)
    return solver.run(start)


def fit_hirrr_binary(
    ds: Dataset, cfg: FitConfig, init: Optional[ModelParams] = None
) -> ModelParams:
    """
    HiRRR for all-binary outcomes, run by the general BCD solver.

    The Bernoulli curvature bound is 1/4, so with unit weights the A-step
    starts from 4 (XᵀX)⁺Xᵀ[Y - plogis(Θ)]B and the B-step majorizer uses the
    4-scaled working responses. A trial step that would raise the objective
    is halved. Weighted fits scale the bound by the largest weight.

    Raises:
        DomainError: If any outcome family is not Bernoulli
        ArgumentError: If the rank is out of range
    """
    if any(f is not Family.BERNOULLI for f in ds.families):
        raise DomainError("binary fitter requires every outcome to be Bernoulli")
    check_rank(ds, cfg.rank)
    if not cfg.has_unit_weights():
        logger.warning("Binary fitter received non-uniform weights; curvature bound scales with the largest weight")
    return fit_hirrr_general(ds, cfg, init)
