"""Unit tests for the Gaussian closed-form fit."""

import numpy as np
import pytest

from hirrr.config import FitConfig
from hirrr.estimators.base import Dataset
from hirrr.estimators.bcd import fit_hirrr_general
from hirrr.estimators.closed_form import fit_hirrr_gaussian, gaussian_dispersion
from hirrr.estimators.objective import hirrr_objective
from hirrr.estimators.rrr import fit_hirrr, fit_rrr
from hirrr.expfam import Family
from hirrr.linalg import is_orthonormal
from hirrr.utils.error_handler import ArgumentError


@pytest.mark.unit
class TestClosedForm:
    """Global minimizer of the Gaussian objective."""

    def test_invariants(self, gaussian_dataset):
        params = fit_hirrr_gaussian(gaussian_dataset, FitConfig(rank=2, lambda_=1.0))
        assert is_orthonormal(params.B)
        assert params.Ltilde.shape == (gaussian_dataset.n1, 2)
        assert np.all(params.phi > 0)
        assert params.converged and params.iterations == 0
        assert params.objective == pytest.approx(
            hirrr_objective(gaussian_dataset, params, FitConfig(rank=2, lambda_=1.0))
        )

    def test_uncentred_rrr_matches_explicit_formula(self, gaussian_dataset):
        ds = gaussian_dataset
        params = fit_rrr(ds, FitConfig(rank=2, fit_intercept=False))
        X, Y = ds.X, ds.Y
        P = X @ np.linalg.pinv(X)
        values, vectors = np.linalg.eigh(Y.T @ P @ Y)
        V = vectors[:, np.argsort(values)[::-1][:2]]
        C = np.linalg.pinv(X) @ Y @ V @ V.T
        np.testing.assert_allclose(params.C, C, atol=1e-8)
        np.testing.assert_array_equal(params.mu, 0.0)

    def test_lambda_zero_ignores_single_records(self, gaussian_dataset):
        hirrr = fit_hirrr(gaussian_dataset, FitConfig(rank=2, lambda_=0.0))
        rrr = fit_rrr(gaussian_dataset, FitConfig(rank=2))
        assert np.linalg.norm(hirrr.C - rrr.C) <= 1e-10
        np.testing.assert_allclose(hirrr.mu, rrr.mu, atol=1e-10)

    def test_full_rank_rrr_is_least_squares(self, gaussian_dataset):
        ds = gaussian_dataset
        params = fit_rrr(ds, FitConfig(rank=4))
        D = np.column_stack([np.ones(ds.n), ds.X])
        beta = np.linalg.lstsq(D, ds.Y, rcond=None)[0]
        np.testing.assert_allclose(params.C, beta[1:], atol=1e-8)
        np.testing.assert_allclose(params.mu, beta[0], atol=1e-8)

    def test_beats_iterative_solution(self, gaussian_dataset):
        cfg = FitConfig(rank=2, lambda_=0.7, dispersion="pooled", max_iters=300, tolerance=1e-10)
        closed = fit_hirrr_gaussian(gaussian_dataset, cfg)
        iterative = fit_hirrr_general(gaussian_dataset, cfg)
        assert closed.objective <= iterative.objective + 1e-8 * abs(iterative.objective)

    def test_single_records_move_the_decoder(self, gaussian_dataset):
        without = fit_hirrr_gaussian(gaussian_dataset, FitConfig(rank=1, lambda_=0.0))
        with_single = fit_hirrr_gaussian(gaussian_dataset, FitConfig(rank=1, lambda_=1.0))
        assert not np.allclose(without.B @ without.B.T, with_single.B @ with_single.B.T)

    @pytest.mark.validation
    def test_non_gaussian_rejected(self, binary_dataset):
        with pytest.raises(ArgumentError):
            fit_hirrr_gaussian(binary_dataset, FitConfig(rank=1))

    @pytest.mark.validation
    def test_weights_rejected(self, gaussian_dataset):
        W = np.ones((gaussian_dataset.n, gaussian_dataset.q))
        W[0, 0] = 2.0
        with pytest.raises(ArgumentError):
            fit_hirrr_gaussian(gaussian_dataset, FitConfig(rank=1, W=W))

    @pytest.mark.validation
    def test_rank_above_min_pq_rejected(self, gaussian_dataset):
        with pytest.raises(ArgumentError):
            fit_hirrr_gaussian(gaussian_dataset, FitConfig(rank=5))

    @pytest.mark.edge_case
    def test_no_single_records(self, rng):
        X = rng.standard_normal((30, 3))
        ds = Dataset(X=X, Y=rng.standard_normal((30, 2)), Ytilde=np.zeros((0, 2)), q0=1, families=[Family.GAUSSIAN] * 2)
        params = fit_hirrr_gaussian(ds, FitConfig(rank=1, lambda_=1.0))
        assert params.Ltilde.shape == (0, 1)


@pytest.mark.unit
class TestGaussianDispersion:
    """Column and pooled dispersion estimates."""

    def test_column_mode(self):
        R = np.array([[1.0, 2.0], [-1.0, 0.0]])
        np.testing.assert_allclose(gaussian_dispersion(R, R[:0], 0.0, "column"), [1.0, 2.0])

    def test_pooled_mode(self):
        R = np.array([[1.0, 2.0], [-1.0, 0.0]])
        np.testing.assert_allclose(gaussian_dispersion(R, R[:0], 0.0, "pooled"), [1.5, 1.5])

    def test_single_records_weighted_by_lambda(self):
        R = np.array([[2.0]])
        Rt = np.array([[0.0], [0.0]])
        assert gaussian_dispersion(R, Rt, 0.5, "column")[0] == pytest.approx(4.0 / 2.0)

    def test_floor(self):
        assert gaussian_dispersion(np.zeros((3, 1)), np.zeros((0, 1)), 0.0, "column")[0] == 1e-8
