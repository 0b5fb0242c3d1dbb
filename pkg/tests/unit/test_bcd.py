"""Unit tests for block-coordinate descent fitters."""

import logging

import numpy as np
import pytest
from scipy.special import expit

from hirrr.config import FitConfig
from hirrr.estimators.bcd import BcdSolver, _State, fit_hirrr_binary, fit_hirrr_general, initialize
from hirrr.estimators.closed_form import fit_hirrr_gaussian
from hirrr.estimators.rrr import fit_hirrr, fit_rrr, select_solver
from hirrr.linalg import is_orthonormal
from hirrr.utils.error_handler import ConvergenceWarning, DivergingPredictorError, DomainError


def assert_monotone(trace):
    trace = np.asarray(trace)
    slack = 1e-10 * np.abs(trace[:-1])
    assert np.all(np.diff(trace) <= slack), f"objective increased: {trace}"


@pytest.mark.unit
class TestInitialize:
    """Warm start from working responses."""

    def test_shapes_and_orthonormality(self, mixed_dataset):
        params = initialize(mixed_dataset, FitConfig(rank=2))
        assert params.A.shape == (mixed_dataset.p, 2)
        assert params.B.shape == (mixed_dataset.q, 2)
        assert params.Ltilde.shape == (mixed_dataset.n1, 2)
        assert is_orthonormal(params.B)
        assert params.phi[0] == 1.0 and params.phi[2] == 1.0
        assert params.phi[1] > 0

    def test_independent_of_single_records(self, binary_dataset):
        a = initialize(binary_dataset, FitConfig(rank=2))
        b = initialize(binary_dataset.without_single_records(), FitConfig(rank=2))
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.B, b.B)
        np.testing.assert_array_equal(a.mu, b.mu)


@pytest.mark.unit
class TestMonotoneObjective:
    """Accepted block updates never increase the objective."""

    @pytest.mark.parametrize("lam", [0.0, 0.25, 1.0])
    def test_binary_trace(self, lam, binary_dataset):
        params = fit_hirrr_binary(binary_dataset, FitConfig(rank=2, lambda_=lam, max_iters=60))
        assert_monotone(params.objective_trace)
        assert is_orthonormal(params.B)

    def test_mixed_trace(self, mixed_dataset):
        params = fit_hirrr_general(mixed_dataset, FitConfig(rank=2, lambda_=1.0, max_iters=80))
        assert_monotone(params.objective_trace)
        assert params.objective_trace[-1] < params.objective_trace[0]

    def test_weighted_trace(self, binary_dataset, rng):
        W = rng.uniform(0.2, 2.0, size=(binary_dataset.n, binary_dataset.q))
        params = fit_hirrr_general(binary_dataset, FitConfig(rank=1, W=W, max_iters=40))
        assert_monotone(params.objective_trace)


@pytest.mark.unit
class TestSolverBehaviour:
    """Stopping, warnings and error paths."""

    def test_gaussian_reaches_closed_form(self, gaussian_dataset):
        cfg = FitConfig(rank=2, lambda_=1.0, dispersion="pooled", max_iters=3000, tolerance=1e-12)
        iterative = fit_hirrr_general(gaussian_dataset, cfg)
        closed = fit_hirrr_gaussian(gaussian_dataset, cfg)
        assert iterative.objective == pytest.approx(closed.objective, rel=1e-6)

    def test_lambda_zero_matches_rrr_for_binary(self, binary_dataset):
        cfg = FitConfig(rank=2, max_iters=50)
        hirrr = fit_hirrr(binary_dataset, cfg.model_copy(update={"lambda_": 0.0}))
        rrr = fit_rrr(binary_dataset, cfg)
        assert np.linalg.norm(hirrr.C - rrr.C) <= 1e-8

    def test_rrr_discards_single_record_weights(self, binary_dataset, rng):
        W = rng.uniform(0.5, 1.5, size=(binary_dataset.n, binary_dataset.q))
        Wt = rng.uniform(0.5, 1.5, size=(binary_dataset.n1, binary_dataset.q))
        cfg = FitConfig(rank=2, W=W, max_iters=30)
        with_tilde = fit_rrr(binary_dataset, cfg.model_copy(update={"Wtilde": Wt}))
        without = fit_rrr(binary_dataset, cfg)
        assert with_tilde.Ltilde.size == 0
        np.testing.assert_allclose(with_tilde.C, without.C, atol=1e-10)

    def test_rrr_with_unit_weights_uses_closed_form(self, gaussian_dataset):
        ones = FitConfig(
            rank=2,
            W=np.ones((gaussian_dataset.n, gaussian_dataset.q)),
            Wtilde=np.ones((gaussian_dataset.n1, gaussian_dataset.q)),
        )
        weighted = fit_rrr(gaussian_dataset, ones)
        plain = fit_rrr(gaussian_dataset, FitConfig(rank=2))
        np.testing.assert_allclose(weighted.C, plain.C, atol=1e-10)

    def test_iteration_cap_warns(self, binary_dataset):
        with pytest.warns(ConvergenceWarning):
            params = fit_hirrr_binary(binary_dataset, FitConfig(rank=2, max_iters=2, tolerance=1e-14))
        assert not params.converged
        assert params.iterations == 2
        assert len(params.objective_trace) == 3

    def test_zero_iterations_returns_start(self, binary_dataset):
        cfg = FitConfig(rank=2, max_iters=0)
        params = fit_hirrr_general(binary_dataset, cfg)
        start = initialize(binary_dataset, cfg)
        np.testing.assert_array_equal(params.A, start.A)
        assert len(params.objective_trace) == 1
        assert not params.converged

    def test_no_intercept_keeps_mu_zero(self, binary_dataset):
        params = fit_hirrr_general(binary_dataset, FitConfig(rank=1, fit_intercept=False, max_iters=20))
        np.testing.assert_array_equal(params.mu, 0.0)

    def test_poisson_divergence_raises(self, mixed_dataset):
        cfg = FitConfig(rank=1)
        solver = BcdSolver(mixed_dataset, cfg)
        start = initialize(mixed_dataset, cfg)
        mu = start.mu.copy()
        mu[2] = 40.0
        state = _State(start.A, start.B, mu, start.Ltilde, start.phi)
        with pytest.raises(DivergingPredictorError):
            solver._check_divergence(state)

    def test_binary_a_step_starts_at_four_times_pinv_gradient(self, binary_dataset, monkeypatch):
        ds = binary_dataset
        cfg = FitConfig(rank=2)
        solver = BcdSolver(ds, cfg)
        start = initialize(ds, cfg)
        state = _State(start.A, start.B, start.mu, start.Ltilde, start.phi)
        monkeypatch.setattr(solver, "_search", lambda s, obj, candidate: (candidate(1.0), obj))

        moved, _ = solver.step_A(state, solver.objective(state))
        theta = start.mu + ds.X @ start.A @ start.B.T
        expected = 4.0 * np.linalg.pinv(ds.X.T @ ds.X) @ ds.X.T @ (ds.Y - expit(theta)) @ start.B
        np.testing.assert_allclose(moved.A - start.A, expected, atol=1e-8)

    @pytest.mark.validation
    def test_binary_fitter_rejects_other_families(self, mixed_dataset):
        with pytest.raises(DomainError):
            fit_hirrr_binary(mixed_dataset, FitConfig(rank=1))

    def test_binary_fitter_logs_weights(self, binary_dataset, caplog):
        W = np.full((binary_dataset.n, binary_dataset.q), 2.0)
        with caplog.at_level(logging.WARNING):
            fit_hirrr_binary(binary_dataset, FitConfig(rank=1, W=W, max_iters=5))
        assert "non-uniform weights" in caplog.text

    def test_solver_routing(self, gaussian_dataset, binary_dataset, mixed_dataset):
        assert select_solver(gaussian_dataset, FitConfig()) == "closed_form"
        assert select_solver(binary_dataset, FitConfig()) == "binary"
        assert select_solver(mixed_dataset, FitConfig()) == "general"
        W = np.full((binary_dataset.n, binary_dataset.q), 0.5)
        assert select_solver(binary_dataset, FitConfig(W=W)) == "general"
        assert select_solver(gaussian_dataset, FitConfig(solver="general")) == "general"
