"""Unit tests for cross-validation, model fitting by spec and split evaluation."""

import numpy as np
import pytest

from hirrr import model_selection
from hirrr.config import CvCriterion, CvGrid, FitConfig, ModelSpec, SplitPlan
from hirrr.estimators.base import Dataset
from hirrr.estimators.factory import EstimatorFactory
from hirrr.expfam import Family
from hirrr.model_selection import (
    cross_validate,
    fit_model,
    make_folds,
    run_random_splits,
    stratified_assignment,
    stratified_split,
)
from hirrr.utils.error_handler import ArgumentError, DegenerateInputError


@pytest.fixture
def named_dataset(rng):
    """Binary outcomes with demographic and code features."""
    n = 200
    age = rng.normal(40, 10, n)
    sex = (rng.random(n) < 0.5).astype(float)
    codes = (rng.random((n, 4)) < 0.3).astype(float)
    logits = -1.0 + 1.5 * codes[:, 0] + 0.02 * (age - 40)
    y0 = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)
    y1 = (rng.random(n) < 0.3 + 0.4 * codes[:, 1]).astype(float)
    return Dataset(
        X=np.column_stack([age, sex, codes]),
        Y=np.column_stack([y0, y1]),
        Ytilde=(rng.random((50, 2)) < 0.3).astype(float),
        q0=1,
        families=[Family.BERNOULLI] * 2,
        feature_names=["age", "sex:F", "icd:1", "icd:2", "icd:3", "icd:4"],
        outcome_names=["target", "surrogate"],
    )


@pytest.mark.unit
class TestFolds:
    """Fold assignment over multi-record rows."""

    def test_classes_spread_evenly(self, rng):
        labels = np.r_[np.ones(13), np.zeros(37)]
        assignment = stratified_assignment(labels, 5, rng)
        for value in (0, 1):
            counts = np.bincount(assignment[labels == value], minlength=5)
            assert counts.max() - counts.min() <= 1

    def test_deterministic_for_seed(self, binary_dataset):
        grid = CvGrid(ranks=[1], folds=4, seed=3)
        np.testing.assert_array_equal(make_folds(binary_dataset, grid), make_folds(binary_dataset, grid))

    def test_target_auc_folds_have_both_classes(self, binary_dataset):
        grid = CvGrid(ranks=[1], folds=5, criterion=CvCriterion.TARGET_AUC)
        assignment = make_folds(binary_dataset, grid)
        labels = binary_dataset.Y[:, 0]
        for fold in range(5):
            assert np.unique(labels[assignment == fold]).size == 2

    @pytest.mark.validation
    def test_too_few_rows(self, binary_dataset):
        with pytest.raises(ArgumentError):
            make_folds(binary_dataset.subset([0, 1, 2]), CvGrid(ranks=[1], folds=5))

    @pytest.mark.validation
    def test_target_auc_needs_binary_primary(self, gaussian_dataset):
        with pytest.raises(ArgumentError):
            make_folds(gaussian_dataset, CvGrid(ranks=[1], criterion=CvCriterion.TARGET_AUC))

    @pytest.mark.edge_case
    def test_single_positive_cannot_fold(self, binary_dataset):
        Y = np.zeros_like(binary_dataset.Y)
        Y[0, 0] = 1.0
        Y[:, 1:] = binary_dataset.Y[:, 1:]
        ds = Dataset(X=binary_dataset.X, Y=Y, Ytilde=binary_dataset.Ytilde, q0=1, families=binary_dataset.families)
        with pytest.raises(DegenerateInputError):
            make_folds(ds, CvGrid(ranks=[1], folds=3, criterion=CvCriterion.TARGET_AUC))


@pytest.mark.unit
class TestCrossValidate:
    """Grid search over (rank, lambda)."""

    def test_scores_cover_grid(self, gaussian_dataset):
        grid = CvGrid(ranks=[1, 2], lambdas=[0.0, 1.0], folds=3)
        result = cross_validate(gaussian_dataset, grid)
        assert len(result.scores) == 2 * 2 * 3
        assert set(result.cell_means) == {(1, 0.0), (1, 1.0), (2, 0.0), (2, 1.0)}
        best = max(result.cell_means.values())
        assert result.cell_means[(result.best_rank, result.best_lambda)] == best
        assert len(result.rows()) == 12

    def test_duplicate_lambdas_score_identically(self, gaussian_dataset):
        grid = CvGrid(ranks=[2], lambdas=[0.5, 0.5], folds=3)
        result = cross_validate(gaussian_dataset, grid)
        first = [v for _, _, f, v in result.scores[:3]]
        second = [v for _, _, f, v in result.scores[3:]]
        np.testing.assert_allclose(first, second, atol=1e-10)

    def test_ties_prefer_small_rank_then_small_lambda(self, gaussian_dataset, monkeypatch):
        monkeypatch.setattr(model_selection, "_score", lambda params, val, criterion, W=None: 0.0)
        grid = CvGrid(ranks=[3, 2], lambdas=[1.0, 0.25], folds=2)
        result = cross_validate(gaussian_dataset, grid)
        assert (result.best_rank, result.best_lambda) == (2, 0.25)

    def test_thread_count_does_not_change_result(self, binary_dataset):
        grid = CvGrid(ranks=[1, 2], lambdas=[0.5], folds=3, criterion=CvCriterion.TARGET_AUC)
        base = FitConfig(max_iters=15)
        single = cross_validate(binary_dataset, grid, base_cfg=base, threads=1)
        pooled = cross_validate(binary_dataset, grid, base_cfg=base, threads=3)
        assert single.scores == pooled.scores

    def test_weights_follow_fold_rows(self, binary_dataset, rng):
        ds = binary_dataset
        W = rng.uniform(0.5, 2.0, size=(ds.n, ds.q))
        Wt = rng.uniform(0.5, 2.0, size=(ds.n1, ds.q))
        grid = CvGrid(ranks=[1], lambdas=[0.5], folds=3, seed=1)
        base = FitConfig(W=W, Wtilde=Wt, max_iters=15)
        result = cross_validate(ds, grid, base_cfg=base)

        assignment = make_folds(ds, grid)
        train_rows, val_rows = np.flatnonzero(assignment != 0), np.flatnonzero(assignment == 0)
        cfg = base.model_copy(update={"rank": 1, "lambda_": 0.5, "seed": 1, "W": W[train_rows]})
        params = EstimatorFactory.create_estimator("hirrr").fit(ds.subset(train_rows), cfg)
        val = ds.subset(val_rows, keep_single_records=False)
        expected = model_selection._score(params, val, grid.criterion, W[val_rows])
        assert result.scores[0][3] == pytest.approx(expected, rel=1e-12)
        assert all(np.isfinite(v) for *_, v in result.scores)

    def test_held_out_rows_do_not_shape_the_fit(self, gaussian_dataset, mocker):
        ds = gaussian_dataset
        grid = CvGrid(ranks=[2], lambdas=[1.0], folds=4, seed=3)
        held_out = make_folds(ds, grid) == 0
        Y = ds.Y.copy()
        Y[held_out] += 50.0
        shifted = Dataset(X=ds.X, Y=Y, Ytilde=ds.Ytilde, q0=ds.q0, families=ds.families)

        spy = mocker.spy(model_selection, "_score")
        original = cross_validate(ds, grid)
        first_fit = spy.call_args_list[0].args[0]
        spy.reset_mock()
        moved = cross_validate(shifted, grid)
        second_fit = spy.call_args_list[0].args[0]

        np.testing.assert_allclose(first_fit.C, second_fit.C, atol=1e-12)
        np.testing.assert_allclose(first_fit.mu, second_fit.mu, atol=1e-12)
        assert moved.scores[0][3] < original.scores[0][3]

    @pytest.mark.validation
    def test_rank_above_min_pq_rejected(self, gaussian_dataset):
        with pytest.raises(ArgumentError):
            cross_validate(gaussian_dataset, CvGrid(ranks=[1, 5]))


@pytest.mark.unit
class TestFitModel:
    """Competitor fits with feature restriction and screening."""

    def test_glm0_keeps_demographics_only(self, named_dataset):
        spec = ModelSpec(name="demo", estimator="glm0")
        params = fit_model(spec, named_dataset)
        assert params.A.shape[0] == named_dataset.p
        np.testing.assert_array_equal(params.A[2:], 0.0)
        assert np.any(params.A[:2] != 0.0)

    def test_screening_keeps_top_codes(self, named_dataset):
        spec = ModelSpec(name="glm", estimator="glm", screen_top_k=1)
        params = fit_model(spec, named_dataset)
        nonzero_rows = np.flatnonzero(np.any(params.A != 0.0, axis=1))
        # age is continuous and always kept; one binary column survives
        assert 0 in nonzero_rows
        assert nonzero_rows.size == 2

    def test_rrr_cv_uses_lambda_zero(self, gaussian_dataset, mocker):
        spy = mocker.spy(model_selection, "cross_validate")
        spec = ModelSpec(name="rrr", estimator="rrr", cv=CvGrid(ranks=[1, 2], lambdas=[0.5, 1.0], folds=3))
        params = fit_model(spec, gaussian_dataset)
        grid = spy.call_args.args[1]
        assert grid.lambdas == [0.0]
        assert params.rank in (1, 2)

    @pytest.mark.validation
    def test_missing_prefix_raises(self, binary_dataset):
        spec = ModelSpec(name="demo", estimator="glm0")
        with pytest.raises(DegenerateInputError):
            fit_model(spec, binary_dataset)


@pytest.mark.unit
class TestRandomSplits:
    """Repeated stratified train/test evaluation."""

    @pytest.fixture
    def models(self):
        return [
            ModelSpec(name="glm", estimator="glm"),
            ModelSpec(name="hirrr", estimator="hirrr", rank=1, max_iters=20),
        ]

    def test_stratified_split_proportions(self, rng):
        labels = np.r_[np.ones(20), np.zeros(80)]
        train, test = stratified_split(labels, 0.9, rng)
        assert labels[train].sum() == 18 and labels[test].sum() == 2
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == 100

    def test_reports_per_model_and_repeat(self, binary_dataset, models):
        plan = SplitPlan(repeats=3, train_fraction=0.8, seed=1)
        evaluation = run_random_splits(binary_dataset, plan, models)
        assert set(evaluation.reports) == {"glm", "hirrr"}
        assert all(len(v) == 3 for v in evaluation.reports.values())
        assert all(r.auc is not None for r in evaluation.reports["hirrr"])
        assert len(evaluation.train_indices) == 3
        assert evaluation.flags == []
        summary = evaluation.summary()
        assert set(summary["glm"]) == {"auc", "prauc", "sens_at_90", "ppv_at_90", "sens_at_95", "ppv_at_95"}

    def test_deterministic_across_threads(self, binary_dataset, models):
        plan = SplitPlan(repeats=2, seed=4)
        single = run_random_splits(binary_dataset, plan, models, threads=1)
        pooled = run_random_splits(binary_dataset, plan, models, threads=4)
        assert single.reports == pooled.reports

    def test_test_rows_do_not_shape_the_fits(self, binary_dataset, models):
        ds = binary_dataset
        plan = SplitPlan(repeats=2, train_fraction=0.8, seed=6)
        original = run_random_splits(ds, plan, models)

        Y = ds.Y.copy()
        for train in original.train_indices:
            test = np.setdiff1d(np.arange(ds.n), train)
            Y[test, 1:] = 1.0 - Y[test, 1:]
        flipped = Dataset(X=ds.X, Y=Y, Ytilde=ds.Ytilde, q0=ds.q0, families=ds.families)
        moved = run_random_splits(flipped, plan, models)

        for a, b in zip(original.train_indices, moved.train_indices):
            np.testing.assert_array_equal(a, b)
        for name in ("glm", "hirrr"):
            for before, after in zip(original.fits[name], moved.fits[name]):
                np.testing.assert_allclose(before.C, after.C, atol=1e-12)
        assert original.reports == moved.reports

    @pytest.mark.validation
    def test_non_binary_primary_rejected(self, gaussian_dataset, models):
        with pytest.raises(ArgumentError):
            run_random_splits(gaussian_dataset, SplitPlan(repeats=1), models)

    @pytest.mark.validation
    def test_duplicate_names_rejected(self, binary_dataset):
        models = [ModelSpec(name="m", estimator="glm"), ModelSpec(name="m", estimator="glm")]
        with pytest.raises(ArgumentError):
            run_random_splits(binary_dataset, SplitPlan(repeats=1), models)
