"""Linear-model estimation and joint (model, ridge penalty) selection.

OLS, ridge and GCV all run through one SVD workspace per candidate submatrix,
so scoring a single response vector and scoring a whole block of bootstrap
responses follow identical arithmetic.  ``select_fit`` minimises the
configured criterion over every (candidate, lambda) pair with a deterministic
tie-break: fewer columns first, then smaller lambda, then lower model id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateScoreError,
    DegreesOfFreedomError,
    SelectionFailureError,
    SingularDesignError,
)
from .rng import generator

# Reciprocal-condition floor for X_j'X_j below which a lambda=0 solve is refused.
RCOND_MIN = 1e-12
# Relative floor under which tr(I - H) is treated as zero (saturated fit).
_TRACE_EPS = 1e-12


def default_lambda_grid() -> np.ndarray:
    """Zero plus 50 log-spaced penalties covering near-OLS to near-null fits."""
    return np.concatenate([[0.0], np.logspace(-4.0, 4.0, 50)])


@dataclass(frozen=True)
class Dataset:
    """Response vector ``y`` (length n) and design matrix ``X`` (n x p).

    Entries must be finite and the row count of ``X`` must equal the length
    of ``y``.  Instances are immutable value objects shared freely across
    threads.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
        if y.ndim != 1:
            raise ValueError(f"y must be 1-dimensional, got shape {y.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"design must be at least 1x1, got {n}x{p}")
        if y.shape[0] != n:
            raise ValueError(f"row count of X ({n}) must equal length of y ({y.shape[0]})")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != p:
                raise ValueError(f"{len(names)} column names for {p} columns")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CandidateModel:
    """A candidate model: an ordered subset of design-matrix columns.

    Column indices are 0-based.  Bounds are checked against the dataset at
    use time; distinctness and non-emptiness are checked here.
    """

    id: object
    columns: tuple[int, ...]

    def __post_init__(self):
        cols = tuple(int(c) for c in self.columns)
        if len(cols) == 0:
            raise ValueError(f"model {self.id!r}: column set is empty")
        if len(set(cols)) != len(cols):
            raise ValueError(f"model {self.id!r}: column indices must be distinct")
        if any(c < 0 for c in cols):
            raise ValueError(f"model {self.id!r}: negative column index")
        object.__setattr__(self, "columns", cols)


@dataclass(frozen=True)
class SelectorConfig:
    """Candidate set, penalty grid and scoring criterion for ``select_fit``.

    ``criterion`` is ``"gcv"`` (closed form, default) or ``"kfold"`` (summed
    squared held-out error over ``cv_folds`` seeded random folds).
    """

    candidates: tuple[CandidateModel, ...]
    lambda_grid: tuple[float, ...]
    criterion: str = "gcv"
    cv_folds: int = 5
    cv_seed: int = 0

    def __post_init__(self):
        cands = tuple(self.candidates)
        if len(cands) == 0:
            raise ValueError("at least one candidate model is required")
        ids = [c.id for c in cands]
        if len(set(ids)) != len(ids):
            raise ValueError("candidate model ids must be unique")
        grid = tuple(float(l) for l in self.lambda_grid)
        if len(grid) == 0:
            raise ValueError("lambda_grid must be nonempty")
        if any(l < 0 for l in grid):
            raise ValueError("lambda_grid entries must be >= 0")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be sorted ascending")
        if self.criterion not in ("gcv", "kfold"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.criterion == "kfold" and self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients embedded in the full p-dimensional space.

    Coefficients are exactly zero at indices outside the selected model's
    columns.  ``residual_ss`` is ``||y - X beta||^2`` on the training data.
    """

    coefficients: np.ndarray
    model_id: object
    lam: float
    residual_ss: float

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients contain non-finite entries")
        object.__setattr__(self, "coefficients", coef)
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.residual_ss < 0:
            raise ValueError("residual_ss must be >= 0")


class _DesignScorer:
    """SVD workspace for one candidate submatrix.

    Holds ``X_j = U diag(s) V'`` and serves ridge solves, hat-matrix traces
    and GCV scores for blocks of response columns, all in one code path.
    """

    def __init__(self, X_sub: np.ndarray, model: CandidateModel, columns: np.ndarray):
        self.model = model
        self.columns = np.asarray(columns, dtype=int)
        self.n, self.k = X_sub.shape
        U, s, Vt = np.linalg.svd(X_sub, full_matrices=False)
        self.X_sub = X_sub
        self.U = U
        self.s = s
        self.s2 = s * s
        self.V = np.ascontiguousarray(Vt.T)
        smax = float(s[0]) if s.size else 0.0
        self.gram_rcond = float((s[-1] / s[0]) ** 2) if smax > 0.0 else 0.0
        self.full_rank = self.n >= self.k and self.gram_rcond >= RCOND_MIN

    @classmethod
    def for_data(cls, data: Dataset, model: CandidateModel) -> "_DesignScorer":
        cols = np.asarray(model.columns, dtype=int)
        if cols.max() >= data.p:
            raise ValueError(
                f"model {model.id!r}: column index {int(cols.max())} out of range for p={data.p}"
            )
        return cls(data.X[:, cols], model, cols)

    def require_full_rank(self, context: str) -> None:
        if self.n < self.k:
            raise SingularDesignError(
                f"{context}: n={self.n} rows cannot identify k={self.k} columns "
                f"(model {self.model.id!r})"
            )
        if not self.full_rank:
            raise SingularDesignError(
                f"{context}: X'X for model {self.model.id!r} has reciprocal condition "
                f"{self.gram_rcond:.3e} < {RCOND_MIN:g} (k={self.k} columns)"
            )

    def coef_block(self, Y: np.ndarray, lam: float) -> np.ndarray:
        """Ridge coefficients ``(X'X + lam I)^-1 X'Y`` per column of Y; (k, B)."""
        f = self.s / (self.s2 + lam)
        return self.V @ (f[:, None] * (self.U.T @ Y))

    def gcv_prep(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-column sufficient statistics for GCV at any lambda."""
        UtY = self.U.T @ Y
        sq = UtY * UtY
        perp = np.einsum("ij,ij->j", Y, Y) - sq.sum(axis=0)
        np.maximum(perp, 0.0, out=perp)
        return sq, perp

    def gcv_from_prep(self, sq: np.ndarray, perp: np.ndarray, lam: float) -> np.ndarray:
        """GCV scores ``n RSS(lam) / tr(I - H(lam))^2`` per response column."""
        d = self.s2 / (self.s2 + lam)
        denom = self.n - float(d.sum())
        if denom <= self.n * _TRACE_EPS:
            raise DegenerateScoreError(
                f"model {self.model.id!r} at lambda={lam:g}: tr(I - H) = {denom:.3e} "
                "leaves no residual degrees of freedom"
            )
        w = (1.0 - d) ** 2
        rss = w @ sq + perp
        return self.n * rss / (denom * denom)


def _id_key(model_id) -> tuple:
    # ints and strings both order deterministically without cross-type compares
    if isinstance(model_id, bool):
        return (2, 0.0, str(model_id))
    if isinstance(model_id, (int, float)):
        return (0, float(model_id), "")
    return (1, 0.0, str(model_id))


class _PairSelector:
    """All (candidate, lambda) pairs of a selector in tie-break order.

    Pairs are sorted by (column count, lambda, model id), so a plain argmin
    over the score matrix realises the documented tie-break: ``np.argmin``
    returns the first index attaining the minimum.
    """

    def __init__(self, data: Dataset, config: SelectorConfig):
        self.data = data
        self.config = config
        self.scorers = [_DesignScorer.for_data(data, m) for m in config.candidates]
        pairs = []
        for si, sc in enumerate(self.scorers):
            for lam in config.lambda_grid:
                pairs.append((sc.k, float(lam), _id_key(sc.model.id), si))
        pairs.sort(key=lambda t: (t[0], t[1], t[2]))
        self.pair_scorer_index = np.array([t[3] for t in pairs], dtype=int)
        self.pair_lambda = np.array([t[1] for t in pairs], dtype=float)
        self.n_pairs = len(pairs)
        self.pair_valid = np.ones(self.n_pairs, dtype=bool)
        for pi in range(self.n_pairs):
            sc = self.scorers[self.pair_scorer_index[pi]]
            lam = self.pair_lambda[pi]
            if lam == 0.0 and not sc.full_rank:
                self.pair_valid[pi] = False
                continue
            d = sc.s2 / (sc.s2 + lam) if lam > 0.0 else np.ones_like(sc.s2)
            if sc.n - float(d.sum()) <= sc.n * _TRACE_EPS:
                self.pair_valid[pi] = False
        if self.config.criterion == "kfold":
            self._build_fold_workspaces()

    def _build_fold_workspaces(self):
        n = self.data.n
        k = self.config.cv_folds
        if k > n:
            raise ValueError(f"cv_folds={k} exceeds n={n}")
        perm = generator(self.config.cv_seed).permutation(n)
        sizes = np.full(k, n // k)
        sizes[: n % k] += 1
        blocks, start = [], 0
        for s in sizes:
            blocks.append(np.sort(perm[start : start + s]))
            start += s
        self._fold_ws = []
        for va in blocks:
            tr = np.setdiff1d(np.arange(n), va)
            ws = []
            for sc in self.scorers:
                Xtr = self.data.X[np.ix_(tr, sc.columns)]
                Xva = self.data.X[np.ix_(va, sc.columns)]
                ws.append((_DesignScorer(Xtr, sc.model, sc.columns), Xva, tr, va))
            self._fold_ws.append(ws)

    def scores(self, Y: np.ndarray) -> np.ndarray:
        """Score matrix (n_pairs, B) in tie-break order; invalid pairs +inf."""
        out = np.full((self.n_pairs, Y.shape[1]), np.inf)
        if self.config.criterion == "gcv":
            preps: dict[int, tuple[np.ndarray, np.ndarray]] = {}
            for pi in range(self.n_pairs):
                if not self.pair_valid[pi]:
                    continue
                si = int(self.pair_scorer_index[pi])
                sc = self.scorers[si]
                if si not in preps:
                    preps[si] = sc.gcv_prep(Y)
                sq, perp = preps[si]
                out[pi] = sc.gcv_from_prep(sq, perp, self.pair_lambda[pi])
            return out
        for pi in range(self.n_pairs):
            si = int(self.pair_scorer_index[pi])
            lam = self.pair_lambda[pi]
            err = np.zeros(Y.shape[1])
            ok = True
            for ws in self._fold_ws:
                sc_tr, X_va, tr, va = ws[si]
                if lam == 0.0 and not sc_tr.full_rank:
                    ok = False
                    break
                beta = sc_tr.coef_block(Y[tr], lam)
                resid = Y[va] - X_va @ beta
                err += np.einsum("ij,ij->j", resid, resid)
            if ok:
                out[pi] = err
        return out

    def best_index(self, Y: np.ndarray, offset: int = 0) -> np.ndarray:
        """Tie-broken argmin pair index per response column."""
        sc = self.scores(Y)
        idx = np.argmin(sc, axis=0)
        bad = ~np.isfinite(sc[idx, np.arange(sc.shape[1])])
        if np.any(bad):
            b = int(np.argmax(bad))
            raise SelectionFailureError(
                f"replicate {offset + b}: no scoreable (model, lambda) pair"
            )
        return idx

    def coefficients_block(self, pair_idx: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Full-p coefficient columns for per-column selected pairs; (p, B)."""
        out = np.zeros((self.data.p, Y.shape[1]))
        for pi in np.unique(pair_idx):
            cols_b = np.nonzero(pair_idx == pi)[0]
            sc = self.scorers[int(self.pair_scorer_index[pi])]
            beta = sc.coef_block(Y[:, cols_b], self.pair_lambda[pi])
            out[np.ix_(sc.columns, cols_b)] = beta
        return out

    def pair_info(self, pair_idx: int) -> tuple[object, float]:
        sc = self.scorers[int(self.pair_scorer_index[pair_idx])]
        return sc.model.id, float(self.pair_lambda[pair_idx])

    def fit_result(self, pair_idx: int, y: np.ndarray) -> FitResult:
        sc = self.scorers[int(self.pair_scorer_index[pair_idx])]
        lam = float(self.pair_lambda[pair_idx])
        beta_sub = sc.coef_block(y[:, None], lam)[:, 0]
        coef = np.zeros(self.data.p)
        coef[sc.columns] = beta_sub
        resid = y - sc.X_sub @ beta_sub
        return FitResult(coef, sc.model.id, lam, float(resid @ resid))


_FULL_MODEL_ID = "full"


def _full_model(data: Dataset) -> CandidateModel:
    return CandidateModel(_FULL_MODEL_ID, tuple(range(data.p)))


def ols_fit(data: Dataset) -> FitResult:
    """Ordinary least squares on the full design.

    Solves the normal equations ``X'X beta = X'y`` through the SVD of ``X``.
    Raises ``SingularDesignError`` when ``n < p`` or the design is rank
    deficient (reciprocal Gram condition below ``RCOND_MIN``).
    """
    sc = _DesignScorer.for_data(data, _full_model(data))
    sc.require_full_rank("ols_fit")
    beta = sc.coef_block(data.y[:, None], 0.0)[:, 0]
    resid = data.y - data.X @ beta
    return FitResult(beta, _FULL_MODEL_ID, 0.0, float(resid @ resid))


def unbiased_variance(data: Dataset, fit: FitResult) -> float:
    """Residual variance ``||y - X beta_ols||^2 / (n - p)``.

    ``fit`` must be the full-model OLS fit of the same data.
    """
    if data.n <= data.p:
        raise DegreesOfFreedomError(
            f"unbiased variance needs n > p, got n={data.n}, p={data.p}"
        )
    return float(fit.residual_ss) / (data.n - data.p)


def ridge_fit(data: Dataset, model: CandidateModel, lam: float) -> FitResult:
    """Ridge fit ``(X_j'X_j + lam I)^-1 X_j' y`` on the model's columns.

    Coefficients are embedded in the full p-space with exact zeros outside
    ``model.columns``.  ``lam = 0`` requires the submatrix to be full column
    rank.
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    sc = _DesignScorer.for_data(data, model)
    if lam == 0.0:
        sc.require_full_rank("ridge_fit at lambda=0")
    beta_sub = sc.coef_block(data.y[:, None], lam)[:, 0]
    coef = np.zeros(data.p)
    coef[sc.columns] = beta_sub
    resid = data.y - sc.X_sub @ beta_sub
    return FitResult(coef, model.id, lam, float(resid @ resid))


def gcv_score(data: Dataset, model: CandidateModel, lam: float) -> float:
    """Generalized cross-validation score ``n RSS(lam) / tr(I - H(lam))^2``."""
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    sc = _DesignScorer.for_data(data, model)
    if lam == 0.0:
        sc.require_full_rank("gcv_score at lambda=0")
    sq, perp = sc.gcv_prep(data.y[:, None])
    return float(sc.gcv_from_prep(sq, perp, lam)[0])


def select_fit(data: Dataset, config: SelectorConfig) -> FitResult:
    """Fit minimising the criterion over candidates x lambda_grid.

    Unscoreable pairs (rank deficient at lambda=0, saturated trace) are
    skipped; if every pair is unscoreable a ``SelectionFailureError`` is
    raised.  Ties break toward fewer columns, then smaller lambda, then lower
    model id.
    """
    sel = _PairSelector(data, config)
    idx = int(sel.best_index(data.y[:, None])[0])
    return sel.fit_result(idx, data.y)


def ridge_prediction_variance(
    data: Dataset, model: CandidateModel, lam: float, x_new: np.ndarray, sigma2: float
) -> float:
    """Sandwich variance of a ridge prediction at ``x_new``.

    Evaluates ``sigma2 * x_j' (G + lam I)^-1 G (G + lam I)^-1 x_j`` with
    ``G = X_j'X_j`` and ``x_j`` the entries of ``x_new`` on the model's
    columns.  This is the no-smoothing baseline variance used for comparison
    intervals.
    """
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (data.p,):
        raise ValueError(f"x_new must have shape ({data.p},), got {x_new.shape}")
    sc = _DesignScorer.for_data(data, model)
    vx = sc.V.T @ x_new[sc.columns]
    g = sc.s / (sc.s2 + float(lam))
    return float(sigma2) * float(np.sum((g * vx) ** 2))
