"""Monte Carlo study of how the resampling law steers model selection.

Synthetic instances use a 20-column uniform design plus intercept with four
nested true models; for every (sigma2, gamma) cell the bootstrap-smoothed
estimator is compared against a GCV-selected ridge baseline on coefficient
estimation error, and the per-cell model-selection frequencies are recorded.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import derive_seed, generator
from .selection import (
    CandidateModel,
    Dataset,
    SelectorConfig,
    default_lambda_grid,
    select_fit,
)
from .smoothing import ResamplingDistribution, pbs_fit
from .tabular import fmt, parse_float, read_csv, write_csv

_N_FEATURES = 20
_N_MODELS = 4

# Path tags for per-replication stream derivation.
_TAG_DESIGN = 0
_TAG_RESPONSE = 1
_TAG_CELL = 2


def _default_sigma2_sweep() -> tuple[float, ...]:
    return tuple(float(v) ** 2 for v in np.arange(1.0, 10.0 + 1e-9, 0.2))


def _default_gamma_sweep() -> tuple[float, ...]:
    return (0.0, 0.2, 0.5, 1.0)


@dataclass(frozen=True)
class StudyConfig:
    """Design of one Monte Carlo run.

    Desk-scale defaults (reps=100, B=200) keep a full sweep in the minutes
    range; scale up via the fields.  ``n`` must exceed 21 so the intercept
    plus 20 features stay estimable.
    """

    n: int = 30
    true_model_j: int = 2
    noise_sd: float = 5.0
    reps: int = 100
    b: int = 200
    sigma2_sweep: tuple[float, ...] = field(default_factory=_default_sigma2_sweep)
    gamma_sweep: tuple[float, ...] = field(default_factory=_default_gamma_sweep)
    lambda_grid: tuple[float, ...] | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.n <= _N_FEATURES + 1:
            raise ValueError(f"n must exceed {_N_FEATURES + 1}, got {self.n}")
        if self.true_model_j not in (1, 2, 3, 4):
            raise ValueError(f"true_model_j must be in 1..4, got {self.true_model_j}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        s2 = tuple(float(v) for v in self.sigma2_sweep)
        gs = tuple(float(v) for v in self.gamma_sweep)
        if not s2 or not gs:
            raise ValueError("sweeps must be nonempty")
        if any(v <= 0 for v in s2):
            raise ValueError("sigma2 sweep values must be > 0")
        if any(not 0.0 <= g <= 1.0 for g in gs):
            raise ValueError("gamma sweep values must be in [0, 1]")
        object.__setattr__(self, "sigma2_sweep", s2)
        object.__setattr__(self, "gamma_sweep", gs)
        if self.lambda_grid is not None:
            object.__setattr__(
                self, "lambda_grid", tuple(float(l) for l in self.lambda_grid)
            )


@dataclass
class StudyResult:
    """Per-cell estimation MSE and selection frequencies, plus the baseline."""

    sigma2_sweep: tuple[float, ...]
    gamma_sweep: tuple[float, ...]
    mse: np.ndarray
    selection_freq: np.ndarray
    ridge_baseline_mse: float

    def mse_at(self, sigma2: float, gamma: float) -> float:
        i = self.sigma2_sweep.index(float(sigma2))
        j = self.gamma_sweep.index(float(gamma))
        return float(self.mse[i, j])

    def freq_at(self, sigma2: float, gamma: float) -> np.ndarray:
        i = self.sigma2_sweep.index(float(sigma2))
        j = self.gamma_sweep.index(float(gamma))
        return self.selection_freq[i, j]


def generate_design(n: int, p: int, seed: int) -> np.ndarray:
    """n x p matrix of i.i.d. uniform draws on [-5, 5]."""
    if n < 1 or p < 1:
        raise ValueError(f"design must be at least 1x1, got {n}x{p}")
    return generator(seed).uniform(-5.0, 5.0, size=(n, p))


def true_coefficients(j: int) -> np.ndarray:
    """Feature coefficients of model j: ones on the first 5j entries."""
    if j not in (1, 2, 3, 4):
        raise ValueError(f"model index must be in 1..4, got {j}")
    beta = np.zeros(_N_FEATURES)
    beta[: 5 * j] = 1.0
    return beta


def generate_response(X: np.ndarray, j: int, noise_sd: float, seed: int) -> np.ndarray:
    """Response ``1 + X beta_j + eps`` with ``eps ~ N(0, noise_sd^2 I)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != _N_FEATURES:
        raise ValueError(f"X must have {_N_FEATURES} columns, got shape {X.shape}")
    beta = true_coefficients(j)
    eps = noise_sd * generator(seed).standard_normal(X.shape[0])
    return 1.0 + X @ beta + eps


def nested_candidates() -> tuple[CandidateModel, ...]:
    """The four nested candidates: intercept plus feature columns 1..5j."""
    return tuple(
        CandidateModel(j, tuple(range(0, 5 * j + 1))) for j in range(1, _N_MODELS + 1)
    )


def run_study(config: StudyConfig, threads: int = 1) -> StudyResult:
    """Monte Carlo sweep over the (sigma2, gamma) grid.

    Replication r draws a fresh design and response from streams
    ``(master_seed, 0, r)`` and ``(master_seed, 1, r)``; the cell (r, i, j)
    fit uses seed ``derive_seed(master_seed, 2, r, i, j)``.  Replications are
    independent tasks; accumulation happens in replication order, so the
    result is identical for any ``threads``.
    """
    lam_grid = (
        tuple(default_lambda_grid()) if config.lambda_grid is None else config.lambda_grid
    )
    selector = SelectorConfig(candidates=nested_candidates(), lambda_grid=lam_grid)
    t, s = len(config.sigma2_sweep), len(config.gamma_sweep)
    sq_err = np.empty((config.reps, t, s))
    freqs = np.empty((config.reps, t, s, _N_MODELS))
    base_err = np.empty(config.reps)
    beta_true = np.concatenate([[1.0], true_coefficients(config.true_model_j)])
    id_to_slot = {j: j - 1 for j in range(1, _N_MODELS + 1)}

    def run_rep(r: int) -> None:
        X = generate_design(config.n, _N_FEATURES, derive_seed(config.master_seed, _TAG_DESIGN, r))
        y = generate_response(
            X, config.true_model_j, config.noise_sd, derive_seed(config.master_seed, _TAG_RESPONSE, r)
        )
        data = Dataset(y, np.column_stack([np.ones(config.n), X]))
        baseline = select_fit(data, selector)
        base_err[r] = float(np.sum((baseline.coefficients - beta_true) ** 2))
        for i, sigma2 in enumerate(config.sigma2_sweep):
            for j, gamma in enumerate(config.gamma_sweep):
                fit = pbs_fit(
                    data,
                    ResamplingDistribution(gamma=gamma, sigma2=sigma2),
                    config.b,
                    selector,
                    derive_seed(config.master_seed, _TAG_CELL, r, i, j),
                    store_responses=False,
                )
                sq_err[r, i, j] = float(np.sum((fit.beta_pbs - beta_true) ** 2))
                counts = np.zeros(_N_MODELS)
                for mid in fit.model_ids:
                    counts[id_to_slot[mid]] += 1.0
                freqs[r, i, j] = counts / config.b

    if threads > 1 and config.reps > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_rep, r) for r in range(config.reps)]
            for fut in futures:
                fut.result()
    else:
        for r in range(config.reps):
            run_rep(r)

    return StudyResult(
        sigma2_sweep=config.sigma2_sweep,
        gamma_sweep=config.gamma_sweep,
        mse=sq_err.mean(axis=0),
        selection_freq=freqs.mean(axis=0),
        ridge_baseline_mse=float(base_err.mean()),
    )


def write_study_csvs(result: StudyResult, out_dir: str | Path) -> tuple[Path, Path]:
    """Emit ``study_mse.csv`` and ``study_freq.csv`` (long format)."""
    out_dir = Path(out_dir)
    mse_path = out_dir / "study_mse.csv"
    freq_path = out_dir / "study_freq.csv"
    mse_rows = []
    freq_rows = []
    for i, s2 in enumerate(result.sigma2_sweep):
        for j, g in enumerate(result.gamma_sweep):
            mse_rows.append([fmt(s2), fmt(g), fmt(result.mse[i, j])])
            for m in range(_N_MODELS):
                freq_rows.append(
                    [fmt(s2), fmt(g), str(m + 1), fmt(result.selection_freq[i, j, m])]
                )
    write_csv(mse_path, ["sigma2", "gamma", "value"], mse_rows)
    write_csv(freq_path, ["sigma2", "gamma", "model_id", "value"], freq_rows)
    return mse_path, freq_path


def read_study_mse_csv(path: str | Path) -> list[tuple[float, float, float]]:
    header, rows = read_csv(path)
    if header != ["sigma2", "gamma", "value"]:
        raise ValueError(f"{path}: unexpected header {header}")
    return [
        tuple(parse_float(path, ln, name, v) for name, v in zip(header, row))
        for ln, row in enumerate(rows, start=2)
    ]


def read_study_freq_csv(path: str | Path) -> list[tuple[float, float, int, float]]:
    header, rows = read_csv(path)
    if header != ["sigma2", "gamma", "model_id", "value"]:
        raise ValueError(f"{path}: unexpected header {header}")
    out = []
    for ln, row in enumerate(rows, start=2):
        out.append(
            (
                parse_float(path, ln, "sigma2", row[0]),
                parse_float(path, ln, "gamma", row[1]),
                int(row[2]),
                parse_float(path, ln, "value", row[3]),
            )
        )
    return out


def render_mse_svg(result: StudyResult, path: str | Path) -> None:
    """Line chart of MSE versus sigma2, one polyline per gamma, as plain SVG."""
    width, height, margin = 640, 420, 56
    xs = np.asarray(result.sigma2_sweep)
    all_y = np.concatenate([result.mse.ravel(), [result.ridge_baseline_mse]])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(v: float) -> float:
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v: float) -> float:
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">sigma2</text>',
        f'<text x="16" y="{height / 2:.1f}" font-size="13" '
        f'transform="rotate(-90 16 {height / 2:.1f})" text-anchor="middle">estimation MSE</text>',
    ]
    yb = sy(result.ridge_baseline_mse)
    parts.append(
        f'<line x1="{margin}" y1="{yb:.2f}" x2="{width - margin}" y2="{yb:.2f}" '
        'stroke="#555555" stroke-dasharray="6 4"/>'
    )
    parts.append(
        f'<text x="{width - margin}" y="{yb - 5:.2f}" text-anchor="end" font-size="12" '
        'fill="#555555">ridge baseline</text>'
    )
    for j, g in enumerate(result.gamma_sweep):
        color = colors[j % len(colors)]
        pts = " ".join(
            f"{sx(float(x)):.2f},{sy(float(result.mse[i, j])):.2f}" for i, x in enumerate(xs)
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * j + 10}" font-size="12" '
            f'fill="{color}">g={g:g}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
