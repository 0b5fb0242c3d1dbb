"""Unit tests for the per-column GLM baselines."""

import numpy as np
import pytest
from scipy.special import expit

from hirrr.config import FitConfig
from hirrr.estimators.base import Dataset
from hirrr.estimators.glm import (
    GlmEstimator,
    fit_glm_columns,
    fit_glm_gaussian,
    fit_glm_logistic,
    fit_glm_poisson,
)
from hirrr.expfam import Family
from hirrr.utils.error_handler import ConvergenceWarning, DegenerateInputError


def _score(X, y, coef, intercept):
    p = expit(intercept + X @ coef)
    return np.concatenate([[np.sum(y - p)], X.T @ (y - p)])


@pytest.mark.unit
class TestLogistic:
    """IRLS logistic regression."""

    def test_score_equations_hold(self, rng):
        X = rng.standard_normal((300, 3))
        y = (rng.random(300) < expit(0.3 + X @ np.array([1.0, -0.5, 0.0]))).astype(float)
        fit = fit_glm_logistic(X, y)
        assert fit.converged
        np.testing.assert_allclose(_score(X, y, fit.coef, fit.intercept), 0.0, atol=1e-6)
        assert fit.std_errors is not None and np.all(fit.std_errors > 0)

    def test_recovers_coefficients(self, rng):
        X = rng.standard_normal((5000, 2))
        beta = np.array([1.0, -1.0])
        y = (rng.random(5000) < expit(-0.5 + X @ beta)).astype(float)
        fit = fit_glm_logistic(X, y)
        np.testing.assert_allclose(fit.coef, beta, atol=0.15)
        assert fit.intercept == pytest.approx(-0.5, abs=0.15)

    def test_constant_column_gets_zero(self, rng):
        X = np.column_stack([rng.standard_normal(100), np.ones(100)])
        y = (rng.random(100) < 0.4).astype(float)
        y[:2] = [0.0, 1.0]
        fit = fit_glm_logistic(X, y)
        assert fit.coef[1] == 0.0

    @pytest.mark.edge_case
    def test_separation_is_flagged(self):
        X = np.linspace(-1, 1, 40)[:, None]
        y = (X[:, 0] > 0).astype(float)
        with pytest.warns(ConvergenceWarning):
            fit = fit_glm_logistic(X, y)
        assert fit.separated
        assert not fit.converged

    @pytest.mark.validation
    def test_single_class_rejected(self):
        with pytest.raises(DegenerateInputError):
            fit_glm_logistic(np.ones((5, 1)), np.zeros(5))


@pytest.mark.unit
class TestOtherFamilies:
    """Gaussian and Poisson fits."""

    def test_gaussian_matches_least_squares(self, rng):
        X = rng.standard_normal((50, 3))
        y = X @ np.array([1.0, 2.0, -1.0]) + 0.5 + 0.1 * rng.standard_normal(50)
        fit = fit_glm_gaussian(X, y)
        D = np.column_stack([np.ones(50), X])
        beta = np.linalg.lstsq(D, y, rcond=None)[0]
        assert fit.intercept == pytest.approx(beta[0])
        np.testing.assert_allclose(fit.coef, beta[1:])
        assert fit.dispersion == pytest.approx(np.mean((y - D @ beta) ** 2))

    def test_poisson_score_equations(self, rng):
        X = rng.standard_normal((400, 2))
        y = rng.poisson(np.exp(0.2 + X @ np.array([0.3, -0.2]))).astype(float)
        fit = fit_glm_poisson(X, y)
        assert fit.converged
        resid = y - np.exp(fit.intercept + X @ fit.coef)
        np.testing.assert_allclose([resid.sum(), *(X.T @ resid)], 0.0, atol=1e-5)

    def test_all_zero_counts_rejected(self):
        with pytest.raises(DegenerateInputError):
            fit_glm_poisson(np.ones((4, 1)), np.zeros(4))


@pytest.mark.unit
class TestGlmColumns:
    """Packing of column-wise fits as ModelParams."""

    def test_identity_decoder(self, binary_dataset):
        params = fit_glm_columns(binary_dataset.without_single_records(), FitConfig())
        assert params.rank == binary_dataset.q
        np.testing.assert_array_equal(params.B, np.eye(binary_dataset.q))
        assert params.Ltilde.shape == (0, binary_dataset.q)
        assert len(params.objective_trace) == 1

    def test_column_matches_single_fit(self, binary_dataset):
        params = fit_glm_columns(binary_dataset, FitConfig())
        single = fit_glm_logistic(binary_dataset.X, binary_dataset.Y[:, 2])
        np.testing.assert_allclose(params.C[:, 2], single.coef, atol=1e-8)
        assert params.mu[2] == pytest.approx(single.intercept, abs=1e-8)

    def test_estimator_ignores_single_records(self, binary_dataset):
        from_estimator = GlmEstimator().fit(binary_dataset, FitConfig())
        direct = fit_glm_columns(binary_dataset.without_single_records(), FitConfig())
        np.testing.assert_array_equal(from_estimator.C, direct.C)

    @pytest.mark.edge_case
    def test_degenerate_surrogate_gets_intercept_only(self, rng):
        X = rng.standard_normal((60, 2))
        Y = np.column_stack([(rng.random(60) < 0.5).astype(float), np.zeros(60)])
        ds = Dataset(X=X, Y=Y, Ytilde=np.zeros((0, 2)), q0=1, families=[Family.BERNOULLI] * 2)
        params = fit_glm_columns(ds, FitConfig())
        np.testing.assert_array_equal(params.C[:, 1], 0.0)
        assert params.mu[1] < -5

    @pytest.mark.edge_case
    def test_degenerate_primary_raises(self, rng):
        X = rng.standard_normal((30, 2))
        Y = np.column_stack([np.zeros(30), (rng.random(30) < 0.5).astype(float)])
        ds = Dataset(X=X, Y=Y, Ytilde=np.zeros((0, 2)), q0=1, families=[Family.BERNOULLI] * 2)
        with pytest.raises(DegenerateInputError):
            fit_glm_columns(ds, FitConfig())
