"""Estimation and selection: OLS, ridge, GCV, joint argmin."""

import numpy as np
import pytest
from conftest import brute_force_select, dense_gcv, make_instance

from bootsmooth import (
    CandidateModel,
    Dataset,
    DegenerateScoreError,
    DegreesOfFreedomError,
    SelectionFailureError,
    SelectorConfig,
    SingularDesignError,
    gcv_score,
    ols_fit,
    ridge_fit,
    ridge_prediction_variance,
    select_fit,
    unbiased_variance,
)


class TestDataset:
    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="row count"):
            Dataset(np.zeros(3), np.zeros((4, 2)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(np.array([1.0, np.nan]), np.ones((2, 1)))
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(np.ones(2), np.array([[1.0], [np.inf]]))

    def test_candidate_validation(self):
        with pytest.raises(ValueError, match="distinct"):
            CandidateModel("m", (0, 0))
        with pytest.raises(ValueError, match="empty"):
            CandidateModel("m", ())


class TestOlsFit:
    def test_identity_design(self):
        data = Dataset(np.array([3.0, -1.0]), np.eye(2))
        fit = ols_fit(data)
        np.testing.assert_allclose(fit.coefficients, [3.0, -1.0], atol=1e-12)

    def test_response_in_column_space(self):
        data = Dataset(np.array([0.0, 1.0, 2.0]), np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]))
        fit = ols_fit(data)
        np.testing.assert_allclose(fit.coefficients, [0.0, 1.0], atol=1e-12)
        assert fit.residual_ss < 1e-24

    def test_matches_normal_equation_oracle(self, rng):
        # oracle: explicit 3x3 inversion of X'X
        data = make_instance(rng, 6, 3)
        fit = ols_fit(data)
        oracle = np.linalg.inv(data.X.T @ data.X) @ (data.X.T @ data.y)
        np.testing.assert_allclose(fit.coefficients, oracle, rtol=1e-10, atol=1e-12)

    def test_underdetermined_raises_with_dimensions(self, rng):
        data = make_instance(rng, 3, 5)
        with pytest.raises(SingularDesignError, match="n=3.*5 columns"):
            ols_fit(data)

    def test_duplicate_column_raises(self, rng):
        X = rng.uniform(-1, 1, (8, 2))
        data = Dataset(rng.standard_normal(8), np.column_stack([X, X[:, 0]]))
        with pytest.raises(SingularDesignError, match="reciprocal condition"):
            ols_fit(data)


class TestUnbiasedVariance:
    def test_exact_fit_gives_zero(self):
        data = Dataset(np.array([0.0, 1.0, 2.0]), np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]))
        assert unbiased_variance(data, ols_fit(data)) < 1e-24

    def test_hand_computed_value(self):
        # beta_hat = 1, residuals (-1, -1, 2), ss = 6, divisor n - p = 2
        data = Dataset(np.array([0.0, 0.0, 3.0]), np.ones((3, 1)))
        assert unbiased_variance(data, ols_fit(data)) == pytest.approx(3.0, abs=1e-12)

    def test_zero_degrees_of_freedom(self):
        data = Dataset(np.array([1.0, 2.0]), np.eye(2))
        with pytest.raises(DegreesOfFreedomError):
            unbiased_variance(data, ols_fit(data))


class TestRidgeFit:
    def test_lambda_zero_equals_ols_on_submatrix(self, rng):
        for _ in range(100):
            n = int(rng.integers(6, 15))
            p = int(rng.integers(2, min(6, n)))
            data = make_instance(rng, n, p)
            k = int(rng.integers(1, p + 1))
            cols = tuple(sorted(rng.choice(p, size=k, replace=False).tolist()))
            model = CandidateModel("sub", cols)
            rf = ridge_fit(data, model, 0.0)
            sub = Dataset(data.y, data.X[:, list(cols)])
            of = ols_fit(sub)
            np.testing.assert_allclose(
                rf.coefficients[list(cols)], of.coefficients, rtol=1e-10, atol=1e-12
            )

    def test_scalar_closed_form(self):
        data = Dataset(np.array([2.0]), np.array([[1.0]]))
        fit = ridge_fit(data, CandidateModel("m", (0,)), 1.0)
        assert fit.coefficients[0] == pytest.approx(1.0, abs=1e-14)

    def test_shrinkage_limit(self, rng):
        data = make_instance(rng, 10, 3)
        full = CandidateModel("m", (0, 1, 2))
        big = ridge_fit(data, full, 1e12)
        ols = ols_fit(data)
        assert np.linalg.norm(big.coefficients) < 1e-6 * np.linalg.norm(ols.coefficients)

    def test_zeros_outside_selected_columns(self, rng):
        data = make_instance(rng, 12, 5)
        fit = ridge_fit(data, CandidateModel("m", (1, 3)), 0.7)
        assert fit.coefficients[0] == 0.0
        assert fit.coefficients[2] == 0.0
        assert fit.coefficients[4] == 0.0

    def test_singular_at_lambda_zero(self, rng):
        X = rng.uniform(-1, 1, (6, 1))
        data = Dataset(rng.standard_normal(6), np.column_stack([X, X]))
        with pytest.raises(SingularDesignError):
            ridge_fit(data, CandidateModel("m", (0, 1)), 0.0)
        # positive lambda is fine on the same columns
        ridge_fit(data, CandidateModel("m", (0, 1)), 0.5)

    def test_negative_lambda_rejected(self, rng):
        data = make_instance(rng, 5, 2)
        with pytest.raises(ValueError):
            ridge_fit(data, CandidateModel("m", (0,)), -0.1)


class TestGcvScore:
    def test_saturated_fit_raises(self):
        data = Dataset(np.array([1.0, 2.0]), np.eye(2))
        with pytest.raises(DegenerateScoreError):
            gcv_score(data, CandidateModel("m", (0, 1)), 0.0)

    def test_orthogonal_response_hand_value(self):
        # X_j spans e1, e2; y lives on e3, e4 => H y = 0, score n ||y||^2 / (n-p)^2
        X = np.zeros((4, 2))
        X[0, 0] = 1.0
        X[1, 1] = 1.0
        y = np.array([0.0, 0.0, 1.0, 1.0])
        score = gcv_score(Dataset(y, X), CandidateModel("m", (0, 1)), 0.0)
        assert score == pytest.approx(4.0 * 2.0 / (4 - 2) ** 2, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 0.3, 7.0])
    def test_matches_dense_hat_oracle(self, rng, lam):
        data = make_instance(rng, 8, 2)
        model = CandidateModel("m", (0, 1))
        assert gcv_score(data, model, lam) == pytest.approx(
            dense_gcv(data, model, lam), rel=1e-10
        )

    def test_invariant_under_column_permutation(self, rng):
        for _ in range(20):
            data = make_instance(rng, 9, 4)
            lam = float(rng.uniform(0.0, 2.0))
            a = gcv_score(data, CandidateModel("m", (0, 1, 2)), lam)
            b = gcv_score(data, CandidateModel("m", (2, 0, 1)), lam)
            assert a == pytest.approx(b, rel=1e-12)


class TestSelectFit:
    def test_single_pair_returned(self, rng):
        data = make_instance(rng, 8, 2)
        cfg = SelectorConfig(candidates=(CandidateModel("only", (0, 1)),), lambda_grid=(0.5,))
        fit = select_fit(data, cfg)
        assert fit.model_id == "only"
        assert fit.lam == 0.5

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(8, 16))
            data = make_instance(rng, n, 5)
            candidates = (
                CandidateModel(1, (0, 1)),
                CandidateModel(2, (0, 1, 2)),
                CandidateModel(3, (0, 1, 2, 3, 4)),
                CandidateModel(4, (2, 4)),
            )
            cfg = SelectorConfig(candidates=candidates, lambda_grid=(0.0, 0.01, 1.0, 100.0))
            fit = select_fit(data, cfg)
            oracle_id, oracle_lam = brute_force_select(data, cfg)
            assert fit.model_id == oracle_id
            assert fit.lam == oracle_lam

    def test_noiseless_nested_tie_prefers_smaller_model(self):
        # y lies exactly in the span of the smaller model; scores tie at 0
        X = np.zeros((3, 2))
        X[0, 0] = 1.0
        X[1, 1] = 1.0
        y = np.array([1.0, 0.0, 0.0])
        data = Dataset(y, X)
        cfg = SelectorConfig(
            candidates=(CandidateModel(2, (0, 1)), CandidateModel(1, (0,))),
            lambda_grid=(0.0, 1.0),
        )
        fit = select_fit(data, cfg)
        oracle_id, oracle_lam = brute_force_select(data, cfg)
        assert fit.model_id == 1
        assert fit.lam == 0.0
        assert (fit.model_id, fit.lam) == (oracle_id, oracle_lam)

    def test_all_pairs_degenerate_raises(self):
        data = Dataset(np.array([1.0, 2.0]), np.eye(2))
        cfg = SelectorConfig(candidates=(CandidateModel("m", (0, 1)),), lambda_grid=(0.0,))
        with pytest.raises(SelectionFailureError):
            select_fit(data, cfg)

    def test_coefficients_zero_outside_model(self, rng):
        data = make_instance(rng, 10, 4)
        cfg = SelectorConfig(
            candidates=(CandidateModel("a", (0, 2)), CandidateModel("b", (1,))),
            lambda_grid=(0.0, 0.5),
        )
        fit = select_fit(data, cfg)
        cols = {"a": (0, 2), "b": (1,)}[fit.model_id]
        outside = [i for i in range(4) if i not in cols]
        assert all(fit.coefficients[i] == 0.0 for i in outside)

    def test_kfold_criterion_matches_manual_loop(self, rng):
        data = make_instance(rng, 12, 3)
        candidates = (CandidateModel(1, (0,)), CandidateModel(2, (0, 1, 2)))
        cfg = SelectorConfig(
            candidates=candidates,
            lambda_grid=(0.0, 1.0),
            criterion="kfold",
            cv_folds=3,
            cv_seed=5,
        )
        fit = select_fit(data, cfg)

        # manual loop with the same fold layout
        from bootsmooth.rng import generator as _gen

        perm = _gen(5).permutation(12)
        blocks = [np.sort(perm[0:4]), np.sort(perm[4:8]), np.sort(perm[8:12])]
        best = None
        for model in candidates:
            for lam in cfg.lambda_grid:
                err = 0.0
                for va in blocks:
                    tr = np.setdiff1d(np.arange(12), va)
                    sub = Dataset(data.y[tr], data.X[tr])
                    beta = ridge_fit(sub, model, lam).coefficients
                    r = data.y[va] - data.X[va] @ beta
                    err += float(r @ r)
                key = (err, len(model.columns), lam, model.id)
                if best is None or key < best[0]:
                    best = (key, model.id, lam)
        assert (fit.model_id, fit.lam) == (best[1], best[2])

    def test_lambda_grid_validation(self):
        with pytest.raises(ValueError, match="ascending"):
            SelectorConfig(candidates=(CandidateModel("m", (0,)),), lambda_grid=(1.0, 0.5))
        with pytest.raises(ValueError, match=">= 0"):
            SelectorConfig(candidates=(CandidateModel("m", (0,)),), lambda_grid=(-1.0,))
        with pytest.raises(ValueError, match="unique"):
            SelectorConfig(
                candidates=(CandidateModel("m", (0,)), CandidateModel("m", (1,))),
                lambda_grid=(0.0,),
            )


class TestRidgePredictionVariance:
    def test_matches_dense_sandwich(self, rng):
        data = make_instance(rng, 10, 3)
        model = CandidateModel("m", (0, 1, 2))
        lam, s2 = 0.8, 2.5
        x = rng.standard_normal(3)
        G = data.X.T @ data.X
        inv = np.linalg.inv(G + lam * np.eye(3))
        dense = s2 * float(x @ (inv @ G @ inv) @ x)
        assert ridge_prediction_variance(data, model, lam, x, s2) == pytest.approx(
            dense, rel=1e-10
        )
