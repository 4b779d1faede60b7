"""Cross-validated resampling-distribution selection."""

import numpy as np
import pytest
from conftest import make_instance

from bootsmooth import (
    CandidateModel,
    CvGrid,
    CvSurface,
    Dataset,
    ResamplingDistribution,
    SelectorConfig,
    SingularDesignError,
    cv_cell_error,
    cv_error_surface,
    default_sigma2_candidates,
    derive_seed,
    kfold_split,
    pbs_fit,
    read_surface_csv,
    select_distribution,
    select_sigma2_cv,
    write_surface_csv,
)


def selector_for(p):
    candidates = (
        CandidateModel(1, tuple(range(max(1, p // 2)))),
        CandidateModel(2, tuple(range(p))),
    )
    return SelectorConfig(candidates=candidates, lambda_grid=(0.0, 0.5, 5.0))


class TestKfoldSplit:
    def test_balanced_partition(self):
        folds = kfold_split(6, 3, seed=0)
        assert [len(f) for f in folds] == [2, 2, 2]
        union = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(union, np.arange(6))

    def test_leave_one_out(self):
        folds = kfold_split(5, 5, seed=1)
        assert [len(f) for f in folds] == [1] * 5

    def test_deterministic_per_seed(self):
        a = kfold_split(17, 4, seed=9)
        b = kfold_split(17, 4, seed=9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_contiguous_blocks(self):
        folds = kfold_split(7, 3, seed=5, mode="contiguous")
        np.testing.assert_array_equal(folds[0], [0, 1, 2])
        np.testing.assert_array_equal(folds[1], [3, 4])
        np.testing.assert_array_equal(folds[2], [5, 6])

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            kfold_split(5, 1, seed=0)
        with pytest.raises(ValueError):
            kfold_split(5, 6, seed=0)

    def test_partition_property_random_sizes(self, rng):
        for _ in range(20):
            n = int(rng.integers(4, 40))
            k = int(rng.integers(2, n + 1))
            folds = kfold_split(n, k, seed=int(rng.integers(0, 1000)))
            sizes = [len(f) for f in folds]
            assert max(sizes) - min(sizes) <= 1
            union = np.sort(np.concatenate(folds))
            np.testing.assert_array_equal(union, np.arange(n))


class TestCvSurface:
    def test_single_cell_grid(self, rng):
        data = make_instance(rng, 16, 3)
        grid = CvGrid(
            sigma2_candidates=(2.0,), gamma_candidates=(0.5,), k=4, b_inner=20, seed=3
        )
        surface = cv_error_surface(data, grid, selector_for(3))
        assert surface.errors.shape == (1, 1)
        assert surface.selected == (2.0, 0.5)

    def test_null_signal_small_sigma(self, rng):
        X = rng.uniform(-1.0, 1.0, size=(12, 2))
        data = Dataset(np.zeros(12), X)
        grid = CvGrid(
            sigma2_candidates=(1e-16,), gamma_candidates=(0.0, 1.0), k=3, b_inner=15, seed=4
        )
        surface = cv_error_surface(data, grid, selector_for(2))
        assert np.all(np.isfinite(surface.errors))
        assert surface.errors.max() < 1e-10

    def test_matches_naive_loop_oracle(self, rng):
        data = make_instance(rng, 20, 3)
        selector = selector_for(3)
        grid = CvGrid(
            sigma2_candidates=(0.5, 4.0),
            gamma_candidates=(0.0, 1.0),
            k=4,
            b_inner=50,
            seed=77,
        )
        surface = cv_error_surface(data, grid, selector)

        folds = kfold_split(data.n, 4, seed=77, mode="random")
        oracle = np.zeros((2, 2))
        for k in range(4):
            held = folds[k]
            train = np.sort(np.concatenate([folds[i] for i in range(4) if i != k]))
            sub = Dataset(data.y[train], data.X[train])
            for i, s2 in enumerate(grid.sigma2_candidates):
                for j, g in enumerate(grid.gamma_candidates):
                    fit = pbs_fit(
                        sub,
                        ResamplingDistribution(gamma=g, sigma2=s2),
                        50,
                        selector,
                        derive_seed(77, k, i, j),
                    )
                    r = data.y[held] - data.X[held] @ fit.beta_pbs
                    oracle[i, j] += float(r @ r)
        np.testing.assert_allclose(surface.errors, oracle, rtol=1e-9)
        oracle_dist = select_distribution(
            CvSurface(oracle, grid.sigma2_candidates, grid.gamma_candidates, folds, (0, 0))
        )
        assert surface.selected == (oracle_dist.sigma2, oracle_dist.gamma)

    def test_cell_isolation_bitwise(self, rng):
        data = make_instance(rng, 18, 3)
        selector = selector_for(3)
        grid = CvGrid(
            sigma2_candidates=(1.0, 3.0), gamma_candidates=(0.2, 0.8), k=3, b_inner=25, seed=55
        )
        surface = cv_error_surface(data, grid, selector)
        folds = kfold_split(data.n, 3, seed=55, mode="random")
        i, j = 1, 0
        parts = np.array(
            [
                cv_cell_error(
                    data,
                    folds,
                    k,
                    ResamplingDistribution(gamma=0.2, sigma2=3.0),
                    25,
                    selector,
                    derive_seed(55, k, i, j),
                )
                for k in range(3)
            ]
        )
        assert parts.sum(axis=0) == surface.errors[i, j]

    def test_thread_count_invariance(self, rng):
        data = make_instance(rng, 15, 3)
        selector = selector_for(3)
        grid = CvGrid(
            sigma2_candidates=(0.5, 2.0), gamma_candidates=(0.0, 1.0), k=3, b_inner=20, seed=6
        )
        a = cv_error_surface(data, grid, selector, threads=1)
        b = cv_error_surface(data, grid, selector, threads=4)
        np.testing.assert_array_equal(a.errors, b.errors)
        assert a.selected == b.selected

    def test_rank_failure_names_fold(self, rng):
        # 6 rows, 5 columns: dropping a fold of 2 leaves 4 rows < 5 columns
        data = make_instance(rng, 6, 5)
        grid = CvGrid(
            sigma2_candidates=(1.0,), gamma_candidates=(1.0,), k=3, b_inner=5, seed=1
        )
        selector = SelectorConfig(
            candidates=(CandidateModel(1, (0, 1, 2, 3, 4)),), lambda_grid=(0.0, 1.0)
        )
        with pytest.raises(SingularDesignError, match="fold 0"):
            cv_error_surface(data, grid, selector)

    def test_global_ols_mode_differs_but_runs(self, rng):
        data = make_instance(rng, 16, 3)
        selector = selector_for(3)
        base = dict(
            sigma2_candidates=(1.0,), gamma_candidates=(1.0,), k=4, b_inner=20, seed=8
        )
        refit = cv_error_surface(data, CvGrid(**base), selector)
        shared = cv_error_surface(
            data, CvGrid(**base, refit_ols_per_block=False), selector
        )
        assert np.all(np.isfinite(shared.errors))
        # gamma=1 means the mean vector really differs between the two modes
        assert not np.allclose(refit.errors, shared.errors)


class TestSelectDistribution:
    def test_direct_argmin(self):
        surface = CvSurface(
            errors=np.array([[2.0, 1.0], [3.0, 4.0]]),
            sigma2_candidates=(0.5, 1.5),
            gamma_candidates=(0.0, 1.0),
            folds=[],
            selected=(0.5, 1.0),
        )
        dist = select_distribution(surface)
        assert (dist.sigma2, dist.gamma) == (0.5, 1.0)

    def test_all_equal_tie_break(self):
        surface = CvSurface(
            errors=np.ones((3, 2)),
            sigma2_candidates=(2.0, 1.0, 3.0),
            gamma_candidates=(0.7, 0.1),
            folds=[],
            selected=(1.0, 0.1),
        )
        dist = select_distribution(surface)
        assert (dist.sigma2, dist.gamma) == (1.0, 0.1)

    def test_matches_exhaustive_scan(self, rng):
        for _ in range(25):
            t, s = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            errors = rng.uniform(0.0, 10.0, size=(t, s))
            s2s = tuple(sorted(rng.uniform(0.1, 5.0, size=t).tolist()))
            gs = tuple(sorted(rng.uniform(0.0, 1.0, size=s).tolist()))
            surface = CvSurface(errors, s2s, gs, [], (0, 0))
            dist = select_distribution(surface)
            best = min(
                ((errors[i, j], s2s[i], gs[j]) for i in range(t) for j in range(s))
            )
            assert (dist.sigma2, dist.gamma) == (best[1], best[2])


class TestSigmaOnlyReduction:
    def test_reduces_to_general_path_with_gamma_one(self, rng):
        data = make_instance(rng, 16, 3)
        selector = selector_for(3)
        s2s = (0.5, 1.0, 4.0)
        surface_a, dist_a = select_sigma2_cv(
            data, s2s, k=4, b_inner=20, seed=13, selector=selector
        )
        grid = CvGrid(
            sigma2_candidates=s2s, gamma_candidates=(1.0,), k=4, b_inner=20, seed=13
        )
        surface_b = cv_error_surface(data, grid, selector)
        np.testing.assert_array_equal(surface_a.errors, surface_b.errors)
        dist_b = select_distribution(surface_b)
        assert (dist_a.sigma2, dist_a.gamma) == (dist_b.sigma2, dist_b.gamma)
        assert dist_a.gamma == 1.0


class TestDefaults:
    def test_sigma2_candidates_bracket_residual_variance(self, rng):
        data = make_instance(rng, 30, 3, noise=2.0)
        cands = default_sigma2_candidates(data, count=7, span=10.0)
        assert len(cands) == 7
        assert cands[0] == pytest.approx(cands[3] / 10.0, rel=1e-9)
        assert cands[-1] == pytest.approx(cands[3] * 10.0, rel=1e-9)

    def test_exact_fit_rejected(self):
        data = Dataset(np.array([1.0, 2.0, 3.0]), np.array([[1.0], [2.0], [3.0]]))
        with pytest.raises(ValueError, match="zero"):
            default_sigma2_candidates(data)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            CvGrid(sigma2_candidates=(0.0,), gamma_candidates=(0.5,), k=2, b_inner=1, seed=0)
        with pytest.raises(ValueError):
            CvGrid(sigma2_candidates=(1.0,), gamma_candidates=(1.5,), k=2, b_inner=1, seed=0)
        with pytest.raises(ValueError):
            CvGrid(sigma2_candidates=(1.0,), gamma_candidates=(0.5,), k=1, b_inner=1, seed=0)


class TestSurfaceCsv:
    def test_round_trip(self, tmp_path, rng):
        data = make_instance(rng, 15, 3)
        grid = CvGrid(
            sigma2_candidates=(0.7, 2.3), gamma_candidates=(0.0, 0.4, 1.0), k=3, b_inner=10, seed=2
        )
        surface = cv_error_surface(data, grid, selector_for(3))
        path = tmp_path / "surface.csv"
        write_surface_csv(surface, path)
        errors, s2s, gs = read_surface_csv(path)
        np.testing.assert_array_equal(errors, surface.errors)
        assert s2s == surface.sigma2_candidates
        assert gs == surface.gamma_candidates
