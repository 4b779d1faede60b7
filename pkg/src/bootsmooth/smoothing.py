"""Parametric bootstrap smoothing of a model-selection pipeline.

Bootstrap responses are drawn from ``N(gamma * X b_ols + (1 - gamma) * y,
sigma2 I)``, the full (model, lambda) selection is rerun on every replicate,
and the replicate coefficient vectors are averaged.  The module also provides
the delta-method variance of the smoothed prediction in two algebraically
equivalent forms and the resulting prediction interval.

Replicates are processed in fixed-size chunks whose layout never depends on
the worker count, so serial and threaded runs produce bit-identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from scipy.stats import norm

from .errors import DegreesOfFreedomError, NumericalError
from .rng import generator
from .selection import (
    Dataset,
    FitResult,
    SelectorConfig,
    _DesignScorer,
    _PairSelector,
    _full_model,
    ols_fit,
)

# Replicates per task.  Fixed (never derived from the worker count) so that
# the same GEMM shapes occur for any parallelism level.
REPLICATE_CHUNK = 64

# Negative variances larger than this magnitude indicate a bug, not rounding.
_VARIANCE_CLAMP = 1e-12


@dataclass(frozen=True)
class ResamplingDistribution:
    """Gaussian resampling law ``N(gamma X b_ols + (1-gamma) y, sigma2 I)``.

    ``sigma2 = 0`` is permitted as a documented degenerate mode: replicates
    collapse onto the mean vector and no delta-method variance exists.
    """

    gamma: float
    sigma2: float

    def __post_init__(self):
        g = float(self.gamma)
        s2 = float(self.sigma2)
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {g}")
        if not s2 >= 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {s2}")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "sigma2", s2)


@dataclass(frozen=True)
class ReplicateRecord:
    """Per-replicate bookkeeping retained by :class:`PbsFit`."""

    model_id: object
    lam: float
    coefficients: np.ndarray
    y_star: np.ndarray | None


@dataclass
class PbsFit:
    """Smoothed coefficients plus the per-replicate records behind them.

    ``coefficients`` stacks the replicate coefficient vectors (B x p);
    ``beta_pbs`` is their arithmetic mean.  ``responses`` is the (B x n)
    stack of bootstrap responses, or ``None`` when the fit was run with
    ``store_responses=False``; in that case ``cross_moment`` (the centered
    response/coefficient cross moment) carries the sufficient statistics for
    the delta-method covariance.
    """

    beta_pbs: np.ndarray
    coefficients: np.ndarray
    model_ids: list
    lambdas: np.ndarray
    responses: np.ndarray | None
    cross_moment: np.ndarray
    ybar_star: np.ndarray
    mean_vector: np.ndarray
    center_coefficients: np.ndarray
    beta_ols: np.ndarray
    distribution: ResamplingDistribution
    seed: int
    B: int = field(default=0)

    def __post_init__(self):
        if self.B == 0:
            self.B = self.coefficients.shape[0]

    @property
    def replicates(self) -> list[ReplicateRecord]:
        return [
            ReplicateRecord(
                self.model_ids[b],
                float(self.lambdas[b]),
                self.coefficients[b],
                None if self.responses is None else self.responses[b],
            )
            for b in range(self.B)
        ]

    def replicate_predictions(self, x_new: np.ndarray) -> np.ndarray:
        """Per-replicate predictions ``x_new' beta_b``; (B,)."""
        x_new = np.asarray(x_new, dtype=float)
        if x_new.shape != (self.coefficients.shape[1],):
            raise ValueError(
                f"x_new must have shape ({self.coefficients.shape[1]},), got {x_new.shape}"
            )
        return self.coefficients @ x_new


@dataclass(frozen=True)
class PredictionInterval:
    """Symmetric normal-quantile prediction interval."""

    center: float
    half_width: float
    level: float
    variance_components: dict

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        for key in ("smoothing", "residual"):
            if self.variance_components.get(key, 0.0) < 0:
                raise ValueError(f"variance component {key!r} must be >= 0")

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width


def _mix_mean(data: Dataset, base_coefficients: np.ndarray, gamma: float) -> np.ndarray:
    return gamma * (data.X @ base_coefficients) + (1.0 - gamma) * data.y


def resampling_mean(data: Dataset, beta_ols: FitResult, gamma: float) -> np.ndarray:
    """Resampling mean ``gamma X b_ols + (1 - gamma) y``; exact at endpoints."""
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    return _mix_mean(data, beta_ols.coefficients, gamma)


def _draw_block(mean: np.ndarray, sd: float, seed: int, lo: int, hi: int) -> np.ndarray:
    """Columns lo..hi-1 of the replicate matrix; replicate b owns stream (seed, b)."""
    n = mean.shape[0]
    out = np.empty((n, hi - lo))
    for t in range(hi - lo):
        out[:, t] = mean + sd * generator(seed, lo + t).standard_normal(n)
    return out


def draw_replicates(mean: np.ndarray, sigma2: float, B: int, seed: int) -> np.ndarray:
    """B rows drawn from ``N(mean, sigma2 I)``, reproducible from ``seed``.

    Replicate ``b`` consumes its own counter-based stream derived from
    ``(seed, b)``, so the result is independent of chunking or parallel
    scheduling.  ``sigma2 = 0`` returns ``mean`` in every row exactly.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1:
        raise ValueError("mean must be a vector")
    if not sigma2 >= 0.0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    sd = float(np.sqrt(sigma2))
    return _draw_block(mean, sd, seed, 0, B).T


def pbs_fit(
    data: Dataset,
    dist: ResamplingDistribution,
    B: int,
    selector: SelectorConfig,
    seed: int,
    *,
    threads: int = 1,
    store_responses: bool = True,
    mean_coefficients: np.ndarray | None = None,
) -> PbsFit:
    """Run the full selection pipeline on B bootstrap replicates and average.

    Parameters
    ----------
    data : Dataset
        Observed response and design; the full design must be OLS-estimable.
    dist : ResamplingDistribution
        (gamma, sigma2) of the resampling law.
    B : int
        Bootstrap sample size.
    selector : SelectorConfig
        Candidate models and penalty grid applied to every replicate.
    seed : int
        Master seed; replicate b uses the substream (seed, b).
    threads : int
        Worker threads.  Output is bit-identical for any value.
    store_responses : bool
        When False, bootstrap responses are not retained and downstream
        covariances use the accumulated sufficient statistics instead.
    mean_coefficients : ndarray, optional
        Override for the coefficients defining the resampling mean (used by
        cross-validation when the OLS fit is shared across folds instead of
        refit per block).
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    beta_ols = ols_fit(data)
    base = (
        beta_ols.coefficients
        if mean_coefficients is None
        else np.asarray(mean_coefficients, dtype=float)
    )
    if base.shape != (data.p,):
        raise ValueError(f"mean_coefficients must have shape ({data.p},)")
    mean = _mix_mean(data, base, dist.gamma)
    sd = float(np.sqrt(dist.sigma2))
    sel = _PairSelector(data, selector)

    n, p = data.n, data.p
    bounds = [(lo, min(lo + REPLICATE_CHUNK, B)) for lo in range(0, B, REPLICATE_CHUNK)]
    coeffs = np.empty((B, p))
    lambdas = np.empty(B)
    model_ids: list = [None] * B
    responses = np.empty((B, n)) if store_responses else None
    ysum_parts = np.empty((len(bounds), n))
    cross_parts = np.empty((len(bounds), n, p))

    def run_chunk(ci: int) -> None:
        lo, hi = bounds[ci]
        Y = _draw_block(mean, sd, seed, lo, hi)
        idx = sel.best_index(Y, offset=lo)
        C = sel.coefficients_block(idx, Y)
        coeffs[lo:hi] = C.T
        for t, pi in enumerate(idx):
            mid, lam = sel.pair_info(int(pi))
            model_ids[lo + t] = mid
            lambdas[lo + t] = lam
        if responses is not None:
            responses[lo:hi] = Y.T
        u = Y - mean[:, None]
        c = C - base[:, None]
        ysum_parts[ci] = Y.sum(axis=1)
        cross_parts[ci] = u @ c.T

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, ci) for ci in range(len(bounds))]
            for fut in futures:
                fut.result()
    else:
        for ci in range(len(bounds)):
            run_chunk(ci)

    # Reductions in fixed chunk order: identical for any worker count.
    ybar = ysum_parts.sum(axis=0) / B
    cross = cross_parts.sum(axis=0) / B
    beta_pbs = coeffs.mean(axis=0)
    return PbsFit(
        beta_pbs=beta_pbs,
        coefficients=coeffs,
        model_ids=model_ids,
        lambdas=lambdas,
        responses=responses,
        cross_moment=cross,
        ybar_star=ybar,
        mean_vector=mean,
        center_coefficients=np.array(base, copy=True),
        beta_ols=np.array(beta_ols.coefficients, copy=True),
        distribution=dist,
        seed=int(seed),
        B=B,
    )


def pbs_predict(fit: PbsFit, x_new: np.ndarray) -> float:
    """Smoothed prediction ``x_new' beta_pbs``."""
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (fit.beta_pbs.shape[0],):
        raise ValueError(
            f"x_new must have shape ({fit.beta_pbs.shape[0]},), got {x_new.shape}"
        )
    return float(x_new @ fit.beta_pbs)


def _cov_vector(fit: PbsFit, x_new: np.ndarray) -> np.ndarray:
    """Empirical covariance (1/B) sum_b (mu_b - mu_pbs)(y*_b - ybar*); (n,).

    Uses the stored responses when available, otherwise the centered
    sufficient statistics accumulated during the fit; the two paths agree to
    rounding.
    """
    mu_pbs = float(x_new @ fit.beta_pbs)
    if fit.responses is not None:
        mu = fit.coefficients @ x_new
        return ((fit.responses - fit.ybar_star).T @ (mu - mu_pbs)) / fit.B
    cbar_x = float((fit.beta_pbs - fit.center_coefficients) @ x_new)
    ubar = fit.ybar_star - fit.mean_vector
    return fit.cross_moment @ x_new - cbar_x * ubar


def _finalize_variance(value: float, context: str) -> float:
    if value < 0.0:
        if value >= -_VARIANCE_CLAMP:
            return 0.0
        raise NumericalError(
            f"{context}: computed variance {value:.3e} is negative beyond rounding "
            f"tolerance {_VARIANCE_CLAMP:g}"
        )
    return float(value)


def _check_variance_inputs(fit: PbsFit, data: Dataset, x_new: np.ndarray) -> np.ndarray:
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (data.p,):
        raise ValueError(f"x_new must have shape ({data.p},), got {x_new.shape}")
    if fit.distribution.sigma2 == 0.0:
        raise NumericalError(
            "sigma2 = 0 is the degenerate resampling mode: replicates are "
            "constant and the delta-method variance is undefined"
        )
    return x_new


def smoothed_variance(fit: PbsFit, data: Dataset, x_new: np.ndarray) -> float:
    """Delta-method variance of the smoothed prediction, projector form.

    Computes ``cov' {gamma H + (1-gamma) I}^2 cov / sigma2`` with
    ``H = X (X'X)^-1 X'`` and ``cov`` the empirical covariance between
    replicate predictions and replicate responses.  At ``gamma = 1`` this
    coincides with the Gram form (:func:`smoothed_variance_via_gram`) because
    ``H`` is idempotent.
    """
    x_new = _check_variance_inputs(fit, data, x_new)
    return float(smoothed_variances(fit, data, x_new[None, :])[0])


def smoothed_variances(fit: PbsFit, data: Dataset, x_rows: np.ndarray) -> np.ndarray:
    """Projector-form delta-method variance for each row of ``x_rows``; (m,)."""
    x_rows = np.asarray(x_rows, dtype=float)
    if x_rows.ndim != 2 or x_rows.shape[1] != data.p:
        raise ValueError(f"x_rows must have shape (m, {data.p})")
    if fit.distribution.sigma2 == 0.0:
        raise NumericalError(
            "sigma2 = 0 is the degenerate resampling mode: replicates are "
            "constant and the delta-method variance is undefined"
        )
    cov = _cov_matrix(fit, x_rows)
    sc = _DesignScorer.for_data(data, _full_model(data))
    sc.require_full_rank("smoothed_variance")
    hc = sc.U @ (sc.U.T @ cov)
    g = fit.distribution.gamma
    w = g * hc + (1.0 - g) * cov
    values = np.einsum("ij,ij->j", w, w) / fit.distribution.sigma2
    return np.array(
        [_finalize_variance(float(v), "smoothed_variance") for v in values]
    )


def _cov_matrix(fit: PbsFit, x_rows: np.ndarray) -> np.ndarray:
    """Covariance vectors for each target row, stacked as columns; (n, m)."""
    mu_pbs = x_rows @ fit.beta_pbs
    if fit.responses is not None:
        mu = fit.coefficients @ x_rows.T
        return (fit.responses - fit.ybar_star).T @ (mu - mu_pbs[None, :]) / fit.B
    cbar_x = x_rows @ (fit.beta_pbs - fit.center_coefficients)
    ubar = fit.ybar_star - fit.mean_vector
    return fit.cross_moment @ x_rows.T - np.outer(ubar, cbar_x)


def smoothed_variance_via_gram(fit: PbsFit, data: Dataset, x_new: np.ndarray) -> float:
    """Delta-method variance routed through the Gram inverse.

    Computes ``c' (X'X)^-1 c / sigma2`` with ``c = X' cov``, the covariance
    taken against ``X' y*_b`` instead of the raw responses.  Matches
    :func:`smoothed_variance` at ``gamma = 1``.
    """
    x_new = _check_variance_inputs(fit, data, x_new)
    cov = _cov_vector(fit, x_new)
    sc = _DesignScorer.for_data(data, _full_model(data))
    sc.require_full_rank("smoothed_variance_via_gram")
    c = data.X.T @ cov
    z = (sc.V.T @ c) / sc.s
    value = float(z @ z) / fit.distribution.sigma2
    return _finalize_variance(value, "smoothed_variance_via_gram")


def residual_variance_pbs(fit: PbsFit, data: Dataset) -> float:
    """Residual variance around the smoothed fit, ``||y - X beta_pbs||^2 / (n-p)``."""
    if data.n <= data.p:
        raise DegreesOfFreedomError(
            f"residual variance needs n > p, got n={data.n}, p={data.p}"
        )
    r = data.y - data.X @ fit.beta_pbs
    return float(r @ r) / (data.n - data.p)


def prediction_interval(
    fit: PbsFit, data: Dataset, x_new: np.ndarray, alpha: float
) -> PredictionInterval:
    """Two-sided prediction interval for the response at ``x_new``.

    Half width is ``z_{alpha/2} * sqrt(smoothing + residual)`` where the
    smoothing component is the delta-method variance of the smoothed
    prediction and the residual component estimates the new observation's
    noise variance.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    x_new = np.asarray(x_new, dtype=float)
    sv = smoothed_variance(fit, data, x_new)
    rv = residual_variance_pbs(fit, data)
    z = float(norm.ppf(1.0 - alpha / 2.0))
    return PredictionInterval(
        center=pbs_predict(fit, x_new),
        half_width=z * float(np.sqrt(sv + rv)),
        level=1.0 - alpha,
        variance_components={"smoothing": sv, "residual": rv},
    )
