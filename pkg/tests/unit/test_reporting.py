"""Unit tests for factor ranking and the unique-case comparison."""

import numpy as np
import pytest

from hirrr.estimators.base import ModelParams
from hirrr.metrics import fisher_exact
from hirrr.reporting import (
    FACTOR_COLUMNS,
    UNIQUE_CASE_COLUMNS,
    FactorDirection,
    compare_unique_cases,
    factor_table_rows,
    flag_top,
    rank_factors,
    unique_case_table_rows,
)
from hirrr.utils.error_handler import ArgumentError


def params_with_primary(coefs):
    """Rank-1 fit whose primary-outcome coefficients are ``coefs``."""
    coefs = np.asarray(coefs, dtype=float)
    return ModelParams(
        A=coefs[:, None],
        B=np.array([[1.0], [0.0]]),
        mu=np.zeros(2),
        Ltilde=np.zeros((0, 1)),
        phi=np.ones(2),
        rank=1,
    )


@pytest.mark.unit
class TestRankFactors:
    """Averaged standardized coefficients."""

    def test_hand_averaged(self):
        fits = [params_with_primary([1.0, -2.0, 0.5]), params_with_primary([3.0, -1.0, 0.5])]
        rows = rank_factors(fits, np.array([1.0, 2.0, 4.0]), FactorDirection.RISK, 3, ["a", "b", "c"])
        assert [r.feature for r in rows] == ["a", "c", "b"]
        assert rows[0].mean == pytest.approx(2.0)
        assert rows[1].mean == pytest.approx(2.0)
        assert rows[0].sd == pytest.approx(np.std([1.0, 3.0], ddof=1))
        assert rows[2].mean == pytest.approx(-3.0)

    def test_protective_direction_and_top_k(self):
        fits = [params_with_primary([1.0, -2.0, 0.5])]
        rows = rank_factors(fits, np.ones(3), "protective", 1, ["a", "b", "c"])
        assert [r.feature for r in rows] == ["b"]
        assert rows[0].sd == 0.0

    def test_per_fit_sd(self):
        fits = [params_with_primary([1.0, 1.0]), params_with_primary([1.0, 1.0])]
        sds = np.array([[1.0, 0.0], [3.0, 0.0]])
        rows = rank_factors(fits, sds, FactorDirection.RISK, 2, ["a", "b"])
        assert rows[0].feature == "a" and rows[0].mean == pytest.approx(2.0)
        assert rows[1].mean == 0.0

    def test_prevalence_columns(self):
        X = np.array([[1, 0.5], [1, 1.5], [0, 2.0], [0, 3.0]])
        labels = np.array([1, 1, 0, 1])
        rows = rank_factors([params_with_primary([1.0, 0.1])], np.ones(2), FactorDirection.RISK, 2, ["bin", "cont"], X, labels)
        assert rows[0].case_prevalence == pytest.approx(2 / 3)
        assert rows[0].control_prevalence == 0.0
        assert rows[0].log_or == float("inf")
        assert rows[1].log_or is None
        table = factor_table_rows(rows)
        assert table[0] == FACTOR_COLUMNS
        assert table[2][5] == ""

    @pytest.mark.validation
    def test_validation(self):
        with pytest.raises(ArgumentError):
            rank_factors([], np.ones(2), FactorDirection.RISK, 1, ["a", "b"])
        with pytest.raises(ArgumentError):
            rank_factors([params_with_primary([1.0, 2.0])], np.ones(2), FactorDirection.RISK, 1, ["a"])
        with pytest.raises(ArgumentError):
            rank_factors([params_with_primary([1.0, 2.0])], np.ones(3), FactorDirection.RISK, 1, ["a", "b"])


@pytest.mark.unit
class TestFlagTop:
    """Top-fraction flags."""

    def test_ceil_and_ties(self):
        mask = flag_top(np.array([0.1, 0.9, 0.9, 0.5]), 0.5)
        np.testing.assert_array_equal(mask, [False, True, True, False])
        assert flag_top(np.arange(10.0), 0.15).sum() == 2
        assert flag_top(np.arange(10.0), 0.1).sum() == 1

    def test_tie_goes_to_lower_index(self):
        np.testing.assert_array_equal(flag_top(np.array([0.5, 0.5, 0.5]), 0.34), [True, True, False])


@pytest.mark.unit
class TestUniqueCases:
    """Cases both models flag versus those only model B flags."""

    def setup_method(self):
        # at 60% B flags 0-5, A flags 0-3 and 6-7
        self.scores_a = np.array([9, 8, 7, 6, 0, 0, 5, 4, 3, 2], dtype=float)
        self.scores_b = np.array([9, 8, 7, 6, 5, 5, 0, 0, 0, 0], dtype=float)
        self.labels = np.array([1, 1, 1, 0, 1, 1, 1, 0, 0, 0])
        self.features = np.array(
            [[0, 1], [0, 1], [0, 0], [1, 1], [1, 0], [1, 1], [0, 0], [0, 0], [0, 0], [0, 0]]
        )

    def test_group_sizes_and_counts(self):
        result = compare_unique_cases(
            self.scores_a, self.scores_b, self.labels, self.features, ["f1", "f2"], top_fraction=0.6
        )
        assert (result.n_both, result.n_only_b) == (3, 2)
        by_name = {r.feature: r for r in result.rows}
        assert (by_name["f1"].exposed_both, by_name["f1"].exposed_only_b) == (0, 2)
        assert (by_name["f2"].exposed_both, by_name["f2"].exposed_only_b) == (2, 1)
        assert by_name["f1"].p_value == pytest.approx(fisher_exact([[0, 3], [2, 0]]))
        assert result.rows[0].p_value <= result.rows[1].p_value
        assert all(r.p_adjusted >= r.p_value for r in result.rows)
        assert len(unique_case_table_rows(result)) == 3

    def test_empty_group_gives_empty_table(self):
        result = compare_unique_cases(
            self.scores_a, self.scores_a, self.labels, self.features, ["f1", "f2"], top_fraction=0.6
        )
        assert result.n_only_b == 0
        assert result.empty
        assert unique_case_table_rows(result) == [UNIQUE_CASE_COLUMNS]

    @pytest.mark.validation
    def test_validation(self):
        with pytest.raises(ArgumentError):
            compare_unique_cases(self.scores_a, self.scores_b[:5], self.labels, self.features, ["f1", "f2"])
        with pytest.raises(ArgumentError):
            compare_unique_cases(self.scores_a, self.scores_b, self.labels, self.features, ["f1"])
        with pytest.raises(ArgumentError):
            compare_unique_cases(self.scores_a, self.scores_b, self.labels, self.features, ["f1", "f2"], 0.0)
