"""Bootstrap smoothing in one picture: unstable selection, stable average.

Fits a small regression where GCV flips between candidate models from sample
to sample, smooths the selection by averaging fits over parametric bootstrap
replicates, and builds a delta-method prediction interval.  Ends with the
degenerate (sigma2 = 0, gamma = 1) sanity check where smoothing collapses
onto plain OLS.
"""

import numpy as np

import bootsmooth as bs

rng = np.random.default_rng(7)

# --- data: 30 observations, intercept + 20 features, only 10 of them real ---
n = 30
X = np.column_stack([np.ones(n), rng.uniform(-5.0, 5.0, size=(n, 20))])
beta_true = np.zeros(21)
beta_true[:11] = 1.0
y = X @ beta_true + rng.normal(0.0, 5.0, size=n)
data = bs.Dataset(y, X)

selector = bs.SelectorConfig(
    candidates=bs.nested_candidates(),
    lambda_grid=tuple(bs.default_lambda_grid()),
)

single = bs.select_fit(data, selector)
print(f"single GCV fit picks model {single.model_id} at lambda={single.lam:.4g}")

# --- smooth the selection over 500 bootstrap replicates ---
dist = bs.ResamplingDistribution(gamma=0.0, sigma2=25.0)
fit = bs.pbs_fit(data, dist, B=500, selector=selector, seed=7)
counts = {m: fit.model_ids.count(m) for m in sorted(set(fit.model_ids))}
print("model choice across replicates:", {m: c / fit.B for m, c in counts.items()})

err_single = np.sum((single.coefficients - beta_true) ** 2)
err_pbs = np.sum((fit.beta_pbs - beta_true) ** 2)
print(f"coefficient error: single fit {err_single:.3f}  smoothed {err_pbs:.3f}")

# --- prediction with an interval at a new point ---
x_new = np.concatenate([[1.0], rng.uniform(-5.0, 5.0, size=20)])
pi = bs.prediction_interval(fit, data, x_new, alpha=0.05)
print(
    f"prediction {pi.center:.2f} +/- {pi.half_width:.2f} "
    f"(smoothing var {pi.variance_components['smoothing']:.3f}, "
    f"residual var {pi.variance_components['residual']:.3f})"
)
truth = float(x_new @ beta_true)
print(f"noise-free truth {truth:.2f}  covered: {pi.lower <= truth <= pi.upper}")

# --- degenerate mode: replicates all equal the OLS surface ---
degenerate = bs.pbs_fit(
    data, bs.ResamplingDistribution(gamma=1.0, sigma2=0.0), B=50, selector=selector, seed=7
)
ols = bs.ols_fit(data)
gap = np.abs(degenerate.beta_pbs - ols.coefficients).max()
print(f"sigma2=0, gamma=1: max |beta_pbs - beta_ols| = {gap:.2e} (full model always wins)")
