"""Cross-validated choice of the bootstrap resampling distribution.

K-fold CV over a (sigma2, gamma) candidate grid: each cell reruns the whole
bootstrap-smoothing pipeline on the training block and accumulates squared
held-out prediction error.  Cells are independent tasks with their own
derived seeds, so the surface is reproducible cell by cell and under any
parallel schedule.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SingularDesignError
from .rng import derive_seed, generator
from .selection import Dataset, SelectorConfig, ols_fit, unbiased_variance
from .smoothing import ResamplingDistribution, pbs_fit
from .tabular import fmt, parse_float, read_csv, write_csv

DEFAULT_GAMMA_CANDIDATES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class CvGrid:
    """Candidate grid and fold layout for resampling-distribution selection.

    ``fold_mode`` is ``"random"`` (seeded permutation) or ``"contiguous"``
    (blocks in index order, for time-ordered data).  When
    ``refit_ols_per_block`` is False the full-data OLS coefficients define
    every training block's resampling mean instead of a per-block refit.
    """

    sigma2_candidates: tuple[float, ...]
    gamma_candidates: tuple[float, ...]
    k: int
    b_inner: int
    seed: int
    fold_mode: str = "random"
    refit_ols_per_block: bool = True

    def __post_init__(self):
        s2 = tuple(float(v) for v in self.sigma2_candidates)
        gs = tuple(float(v) for v in self.gamma_candidates)
        if len(s2) < 1:
            raise ValueError("at least one sigma2 candidate is required")
        if any(not np.isfinite(v) or v <= 0 for v in s2):
            raise ValueError("sigma2 candidates must be finite and > 0")
        if len(gs) < 1:
            raise ValueError("at least one gamma candidate is required")
        if any(not 0.0 <= g <= 1.0 for g in gs):
            raise ValueError("gamma candidates must lie in [0, 1]")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.b_inner < 1:
            raise ValueError(f"b_inner must be >= 1, got {self.b_inner}")
        if self.fold_mode not in ("random", "contiguous"):
            raise ValueError(f"unknown fold_mode {self.fold_mode!r}")
        object.__setattr__(self, "sigma2_candidates", s2)
        object.__setattr__(self, "gamma_candidates", gs)


@dataclass
class CvSurface:
    """Summed squared held-out error per (sigma2, gamma) candidate."""

    errors: np.ndarray
    sigma2_candidates: tuple[float, ...]
    gamma_candidates: tuple[float, ...]
    folds: list[np.ndarray]
    selected: tuple[float, float]


def kfold_split(n: int, k: int, seed: int, mode: str = "random") -> list[np.ndarray]:
    """Partition ``range(n)`` into K blocks with sizes differing by at most 1.

    ``mode="random"`` permutes indices with the seeded generator before
    splitting; ``mode="contiguous"`` keeps index order (time-ordered data).
    Blocks are returned with sorted indices.
    """
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")
    if mode == "random":
        order = generator(seed).permutation(n)
    elif mode == "contiguous":
        order = np.arange(n)
    else:
        raise ValueError(f"unknown fold mode {mode!r}")
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    blocks, start = [], 0
    for s in sizes:
        blocks.append(np.sort(order[start : start + s]))
        start += s
    return blocks


def cv_cell_error(
    data: Dataset,
    folds: list[np.ndarray],
    fold_index: int,
    dist: ResamplingDistribution,
    b_inner: int,
    selector: SelectorConfig,
    seed: int,
    mean_coefficients: np.ndarray | None = None,
) -> float:
    """Squared held-out error of one (fold, sigma2, gamma) cell.

    Runs bootstrap smoothing on the training block (all folds but
    ``fold_index``) and predicts the held-out rows with their own design
    rows.  Exposed so that any cell can be recomputed in isolation from its
    derived seed.
    """
    held = folds[fold_index]
    train = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != fold_index]))
    train_data = Dataset(data.y[train], data.X[train])
    try:
        fit = pbs_fit(
            train_data,
            dist,
            b_inner,
            selector,
            seed,
            mean_coefficients=mean_coefficients,
        )
    except SingularDesignError as exc:
        raise SingularDesignError(f"fold {fold_index}: {exc}") from exc
    resid = data.y[held] - data.X[held] @ fit.beta_pbs
    return float(resid @ resid)


def cv_error_surface(
    data: Dataset, grid: CvGrid, selector: SelectorConfig, threads: int = 1
) -> CvSurface:
    """K-fold CV error over the full (sigma2, gamma) candidate grid.

    Cell (k, i, j) uses the seed derived from ``(grid.seed, k, i, j)``;
    results are deposited by index and summed over folds in fold order, so
    the surface does not depend on the evaluation schedule.
    """
    folds = kfold_split(data.n, grid.k, grid.seed, grid.fold_mode)
    mean_coefficients = None
    if not grid.refit_ols_per_block:
        mean_coefficients = ols_fit(data).coefficients
    t, s = len(grid.sigma2_candidates), len(grid.gamma_candidates)
    cells = [
        (k, i, j)
        for k in range(grid.k)
        for i in range(t)
        for j in range(s)
    ]
    parts = np.empty((grid.k, t, s))

    def run_cell(cell: tuple[int, int, int]) -> None:
        k, i, j = cell
        dist = ResamplingDistribution(
            gamma=grid.gamma_candidates[j], sigma2=grid.sigma2_candidates[i]
        )
        parts[k, i, j] = cv_cell_error(
            data,
            folds,
            k,
            dist,
            grid.b_inner,
            selector,
            derive_seed(grid.seed, k, i, j),
            mean_coefficients=mean_coefficients,
        )

    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_cell, c) for c in cells]
            for fut in futures:
                fut.result()
    else:
        for c in cells:
            run_cell(c)

    errors = parts.sum(axis=0)
    selected = _argmin_pair(errors, grid.sigma2_candidates, grid.gamma_candidates)
    return CvSurface(
        errors=errors,
        sigma2_candidates=grid.sigma2_candidates,
        gamma_candidates=grid.gamma_candidates,
        folds=folds,
        selected=selected,
    )


def _argmin_pair(
    errors: np.ndarray, sigma2s: tuple[float, ...], gammas: tuple[float, ...]
) -> tuple[float, float]:
    best = errors.min()
    ties = np.argwhere(errors == best)
    pairs = [(sigma2s[i], gammas[j]) for i, j in ties]
    return min(pairs)


def select_distribution(surface: CvSurface) -> ResamplingDistribution:
    """Distribution at the surface's minimal error.

    Ties break toward the smaller sigma2 value, then the smaller gamma value,
    independent of the order in which cells were evaluated.
    """
    sigma2, gamma = _argmin_pair(
        surface.errors, surface.sigma2_candidates, surface.gamma_candidates
    )
    return ResamplingDistribution(gamma=gamma, sigma2=sigma2)


def select_sigma2_cv(
    data: Dataset,
    sigma2_candidates,
    k: int,
    b_inner: int,
    seed: int,
    selector: SelectorConfig,
    fold_mode: str = "random",
    threads: int = 1,
) -> tuple[CvSurface, ResamplingDistribution]:
    """Variance-only variant: gamma pinned at 1, CV over sigma2 alone."""
    grid = CvGrid(
        sigma2_candidates=tuple(sigma2_candidates),
        gamma_candidates=(1.0,),
        k=k,
        b_inner=b_inner,
        seed=seed,
        fold_mode=fold_mode,
    )
    surface = cv_error_surface(data, grid, selector, threads=threads)
    return surface, select_distribution(surface)


def default_sigma2_candidates(data: Dataset, count: int = 50, span: float = 100.0) -> tuple[float, ...]:
    """Log-spaced sigma2 candidates bracketing the unbiased residual variance.

    ``count`` values spanning ``[s2_ub / span, s2_ub * span]``.  Raises when
    the residual variance is zero (exact fit), since the grid would collapse.
    """
    s2_ub = unbiased_variance(data, ols_fit(data))
    if s2_ub <= 0.0:
        raise ValueError(
            "unbiased residual variance is zero; supply sigma2 candidates explicitly"
        )
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return (float(s2_ub),)
    lo, hi = np.log10(s2_ub / span), np.log10(s2_ub * span)
    return tuple(float(v) for v in np.logspace(lo, hi, count))


def write_surface_csv(surface: CvSurface, path: str | Path) -> None:
    """Surface as CSV: rows sigma2 candidates, columns gamma candidates."""
    header = ["sigma2"] + [fmt(g) for g in surface.gamma_candidates]
    rows = []
    for i, s2 in enumerate(surface.sigma2_candidates):
        rows.append([fmt(s2)] + [fmt(v) for v in surface.errors[i]])
    write_csv(path, header, rows)


def read_surface_csv(path: str | Path) -> tuple[np.ndarray, tuple[float, ...], tuple[float, ...]]:
    """Inverse of :func:`write_surface_csv`: (errors, sigma2s, gammas)."""
    header, rows = read_csv(path)
    gammas = tuple(parse_float(path, 1, "gamma", v) for v in header[1:])
    sigma2s = []
    errors = []
    for lineno, row in enumerate(rows, start=2):
        sigma2s.append(parse_float(path, lineno, "sigma2", row[0]))
        errors.append([parse_float(path, lineno, "error", v) for v in row[1:]])
    return np.asarray(errors), tuple(sigma2s), gammas
