"""
Stepwise selection by AIC
=========================

Only two of eight candidate features drive the score. Starting from the full
model, stepwise search drops and re-adds single features while AIC improves;
10-fold CV repeats the whole search inside every training split.
"""

import numpy as np

from psyling.stats import FeatureMatrix, aic, kfold_cv, ols_fit, pearson, stepwise_select

rng = np.random.default_rng(0)
n = 120
X = rng.normal(size=(n, 8))
y = 10 + 2.0 * X[:, 1] - 1.5 * X[:, 4] + rng.normal(size=n)
features = FeatureMatrix(tuple(f"user{i}" for i in range(n)), tuple(f"f{j}" for j in range(8)), X)

full = ols_fit(features, y)
trace = []
chosen = stepwise_select(features, y, trace=trace)
print("full model AIC  ", round(aic(full), 2))
for move, name, value in trace:
    print(f"  {move:4s} {name}  -> AIC {value:.2f}")
print("selected", chosen.selected_features, {k: round(v, 2) for k, v in chosen.coefficients.items()})

cv = kfold_cv(features, y, k=10, seed=0)
print("10-fold CV RMSE", round(cv.mean_rmse, 3))

r, p = pearson(X[:, 1], y)
print(f"r(f1, y) = {r:.3f}, p = {p:.2e}")
