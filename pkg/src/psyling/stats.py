"""Regression and evaluation: OLS, AIC stepwise selection, Pearson tests, RMSE, k-fold CV."""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, stats as sps

logger = logging.getLogger(__name__)

__all__ = [
    "StatsError",
    "RankDeficientError",
    "FeatureMatrix",
    "LinearModel",
    "CVResult",
    "ols_fit",
    "aic",
    "stepwise_select",
    "intercept_only",
    "best_single_feature",
    "pearson",
    "rmse",
    "kfold_indices",
    "kfold_cv",
    "topic_correlations",
    "significant_topic_summary",
]

# |R_jj| below this fraction of the column norm marks a column as linearly dependent
COLLINEAR_TOL = 1e-9


class StatsError(ValueError):
    pass


class RankDeficientError(StatsError):
    def __init__(self, column: str):
        super().__init__(f"design matrix is rank deficient: column {column!r} is a linear "
                         f"combination of the intercept and earlier columns")
        self.column = column


@dataclass(frozen=True)
class FeatureMatrix:
    """Named feature table: one row per user, one column per feature."""

    row_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.row_ids), len(self.column_names)):
            raise StatsError(f"values shape {vals.shape} does not match "
                             f"{len(self.row_ids)} rows x {len(self.column_names)} columns")
        if len(set(self.column_names)) != len(self.column_names):
            raise StatsError("column names must be unique")
        if not np.all(np.isfinite(vals)):
            raise StatsError("feature matrix contains missing or non-finite values")

    @property
    def shape(self):
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.column_names.index(c) for c in names]
        return FeatureMatrix(self.row_ids, tuple(names), self.values[:, idx])

    def take(self, rows: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(tuple(self.row_ids[i] for i in rows), self.column_names, self.values[rows])

    def hstack(self, other: "FeatureMatrix") -> "FeatureMatrix":
        if self.row_ids != other.row_ids:
            raise StatsError("cannot join feature matrices with different row ids")
        return FeatureMatrix(self.row_ids, self.column_names + other.column_names,
                             np.hstack([self.values, other.values]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("user_id",) + self.column_names)
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:1] != ["user_id"]:
            raise StatsError(f"{path}: feature CSV must start with a 'user_id' header column")
        header, body = rows[0], rows[1:]
        try:
            values = np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
        except ValueError as exc:
            raise StatsError(f"{path}: non-numeric feature value ({exc})") from exc
        return cls(tuple(r[0] for r in body), tuple(header[1:]), values)


@dataclass
class LinearModel:
    intercept: float
    coefficients: dict[str, float]
    selected_features: list[str]
    rss: float
    n: int
    dropped: list[str] = field(default_factory=list)

    @property
    def p(self) -> int:
        return len(self.selected_features)

    def predict(self, X: FeatureMatrix) -> np.ndarray:
        if not self.selected_features:
            return np.full(X.shape[0], self.intercept)
        beta = np.array([self.coefficients[c] for c in self.selected_features])
        return self.intercept + X.select(self.selected_features).values @ beta

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": {c: self.coefficients[c] for c in self.selected_features},
            "selected_features": list(self.selected_features),
            "fit_stats": {"rss": self.rss, "n": self.n, "p": self.p},
            "dropped_collinear": list(self.dropped),
        }

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, ensure_ascii=False)
            fh.write("\n")


@dataclass(frozen=True)
class CVResult:
    fold_rmses: tuple[float, ...]
    mean_rmse: float
    k: int
    seed: int


# ---------------------------------------------------------------------------
# least squares

def _as_matrix(X: FeatureMatrix | np.ndarray) -> FeatureMatrix:
    if isinstance(X, FeatureMatrix):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return FeatureMatrix(tuple(str(i) for i in range(arr.shape[0])),
                         tuple(f"x{j}" for j in range(arr.shape[1])), arr)


def _design(values: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(values.shape[0]), values])


def _first_dependent(R: np.ndarray, D: np.ndarray) -> int | None:
    """Index of the first design column whose QR diagonal is negligible, else None."""
    norms = np.linalg.norm(D, axis=0)
    diag = np.abs(np.diag(R))
    for j in range(R.shape[1]):
        if diag[j] <= COLLINEAR_TOL * max(norms[j], 1e-300):
            return j
    return None


def independent_columns(X: FeatureMatrix) -> tuple[list[str], list[str]]:
    """Split columns into a maximal independent prefix-greedy set and the dependent rest.

    Columns are scanned in order; a column is dropped when it is (numerically)
    a linear combination of the intercept and the columns kept before it.
    """
    keep = list(range(X.shape[1]))
    dropped = []
    while True:
        D = _design(X.values[:, keep])
        R = np.linalg.qr(D, mode="r")
        j = _first_dependent(R, D)
        if j is None:
            break
        if j == 0:
            raise StatsError("intercept column is degenerate (no rows?)")
        dropped.append(X.column_names[keep[j - 1]])
        del keep[j - 1]
    return [X.column_names[i] for i in keep], dropped


def ols_fit(X: FeatureMatrix | np.ndarray, y, drop_collinear: bool = False) -> LinearModel:
    """Least-squares fit with intercept, solved through a Householder QR factorization.

    Raises :class:`RankDeficientError` naming the first dependent column
    unless ``drop_collinear`` is set, in which case dependent columns are
    removed (in column order) with a warning.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise StatsError(f"y has shape {y.shape}, expected ({n},)")
    names = list(X.column_names)
    dropped: list[str] = []
    if drop_collinear:
        names, dropped = independent_columns(X)
        if dropped:
            warnings.warn(f"dropped collinear columns: {dropped}", stacklevel=2)
    p = len(names)
    if n <= p + 1:
        raise StatsError(f"need n > p + 1 observations, got n={n}, p={p}")
    D = _design(X.select(names).values if names else np.empty((n, 0)))
    Q, R = np.linalg.qr(D)
    j = _first_dependent(R, D)
    if j is not None:
        raise RankDeficientError(names[j - 1] if j > 0 else "(intercept)")
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - D @ beta
    rss = float(resid @ resid)
    return LinearModel(float(beta[0]), dict(zip(names, map(float, beta[1:]))), names, rss, n, dropped)


def aic(model: LinearModel) -> float:
    """Gaussian AIC ``n*ln(RSS/n) + 2*(p + 2)`` counting intercept and error variance."""
    return _aic(model.rss, model.n, model.p)


def _aic(rss: float, n: int, p: int) -> float:
    if rss <= 0.0:
        warnings.warn("perfect fit (RSS = 0): AIC is -inf", stacklevel=3)
        return -math.inf
    return n * math.log(rss / n) + 2.0 * (p + 2)


# ---------------------------------------------------------------------------
# stepwise selection

def _candidate_rss(D: np.ndarray, y: np.ndarray, pool: np.ndarray):
    """RSS of the current fit and of every single-column drop and add move.

    ``D`` is the current design (intercept first). Dropping column j raises
    RSS by beta_j^2 / [(D'D)^-1]_jj; adding column x lowers it by
    (r.x~)^2 / (x~.x~) where x~ is x with its projection on D removed.
    Add candidates that are numerically inside span(D) get ``nan``.
    """
    Q, R = np.linalg.qr(D)
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - D @ beta
    rss = float(resid @ resid)
    Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]))
    diag_inv = np.einsum("ij,ij->i", Rinv, Rinv)
    drop_rss = rss + beta[1:] ** 2 / diag_inv[1:]
    if pool.shape[1]:
        xt = pool - Q @ (Q.T @ pool)
        xt_sq = np.einsum("ij,ij->j", xt, xt)
        norms = np.einsum("ij,ij->j", pool, pool)
        with np.errstate(divide="ignore", invalid="ignore"):
            add_rss = rss - (resid @ xt) ** 2 / xt_sq
        add_rss = np.where(xt_sq <= (COLLINEAR_TOL ** 2) * np.maximum(norms, 1e-300), np.nan, add_rss)
    else:
        add_rss = np.empty(0)
    return rss, drop_rss, np.maximum(add_rss, 0.0)


def stepwise_select(
    X: FeatureMatrix | np.ndarray,
    y,
    direction: str = "both",
    criterion: str = "aic",
    drop_collinear: bool = False,
    trace: list | None = None,
) -> LinearModel:
    """AIC-guided stepwise regression starting from the full model.

    Each step takes the single drop (or, with ``direction="both"``, add)
    move with the lowest AIC, stopping once no move lowers it. Exact ties
    prefer a drop, then the lexicographically smallest feature name.
    Moves taken are appended to ``trace`` as ``(op, name, aic)`` tuples.
    """
    if direction not in ("backward", "both"):
        raise StatsError(f"direction must be 'backward' or 'both', got {direction!r}")
    if criterion.lower() != "aic":
        raise StatsError(f"unsupported criterion {criterion!r}")
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    full = ols_fit(X, y, drop_collinear=drop_collinear)
    names = full.selected_features
    n = full.n
    order = {c: i for i, c in enumerate(names)}
    selected = list(names)
    values = X.select(names).values if names else np.empty((n, 0))
    current = _aic(full.rss, n, len(selected))
    while True:
        sel_idx = [order[c] for c in selected]
        out = [c for c in names if c not in set(selected)]
        out_idx = [order[c] for c in out]
        D = _design(values[:, sel_idx])
        rss, drop_rss, add_rss = _candidate_rss(D, y, values[:, out_idx] if direction == "both" else values[:, []])
        p = len(selected)
        moves = []
        for c, r in zip(selected, drop_rss):
            moves.append((_aic_quiet(r, n, p - 1), 0, c))
        if direction == "both":
            for c, r in zip(out, add_rss):
                if not np.isnan(r):
                    moves.append((_aic_quiet(r, n, p + 1), 1, c))
        if not moves:
            break
        best_aic, op, name = min(moves)
        if not best_aic < current:
            break
        if op == 0:
            selected.remove(name)
        else:
            selected = [c for c in names if c in set(selected) | {name}]
        logger.debug("stepwise %s %s -> AIC %.6f", "drop" if op == 0 else "add", name, best_aic)
        if trace is not None:
            trace.append(("drop" if op == 0 else "add", name, best_aic))
        current = best_aic
    model = ols_fit(X.select(selected) if selected else _empty(X), y)
    model.dropped = list(full.dropped)
    return model


def _aic_quiet(rss: float, n: int, p: int) -> float:
    if rss <= 0.0:
        return -math.inf
    return n * math.log(rss / n) + 2.0 * (p + 2)


def _empty(X: FeatureMatrix) -> FeatureMatrix:
    return FeatureMatrix(X.row_ids, (), np.empty((X.shape[0], 0)))


def intercept_only(X: FeatureMatrix, y) -> LinearModel:
    """Fit procedure that ignores all features and predicts the training mean."""
    return ols_fit(_empty(_as_matrix(X)), y)


def best_single_feature(X: FeatureMatrix, y) -> LinearModel:
    """Fit procedure using only the column with the largest |Pearson r| against y.

    Zero-variance columns are skipped; ties go to the earliest column.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    best, best_r = None, -1.0
    for name in X.column_names:
        col = X.column(name)
        if np.ptp(col) == 0.0:
            continue
        r = abs(_pearson_r(col, y))
        if r > best_r:
            best, best_r = name, r
    if best is None:
        return intercept_only(X, y)
    return ols_fit(X.select([best]), y)


# ---------------------------------------------------------------------------
# correlation and error metrics

def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("pearson correlation undefined for a zero-variance vector")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson r and its two-tailed p-value from Student's t with n - 2 df."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsError("pearson needs two 1-d vectors of equal length")
    n = x.size
    if n < 3:
        raise StatsError("pearson needs at least 3 observations")
    r = _pearson_r(x, y)
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, float(2.0 * sps.t.sf(abs(t), n - 2))


def rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise StatsError(f"length mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise StatsError("rmse of empty vectors")
    d = predicted - actual
    return math.sqrt(float(d @ d) / d.size)


# ---------------------------------------------------------------------------
# cross-validation

def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with a seeded generator and deal it round-robin into k folds."""
    if k < 2:
        raise StatsError("k must be >= 2")
    if n < k:
        raise StatsError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[i::k]) for i in range(k)]


FitProcedure = Callable[[FeatureMatrix, np.ndarray], LinearModel]


def kfold_cv(X: FeatureMatrix | np.ndarray, y, k: int = 10, seed: int = 0,
             fit_procedure: FitProcedure = stepwise_select) -> CVResult:
    """k-fold cross-validated RMSE; ``fit_procedure`` is re-run on every training split."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    folds = kfold_indices(X.shape[0], k, seed)
    all_rows = np.arange(X.shape[0])
    fold_rmses = []
    for test in folds:
        train = np.setdiff1d(all_rows, test, assume_unique=True)
        model = fit_procedure(X.take(train), y[train])
        fold_rmses.append(rmse(model.predict(X.take(test)), y[test]))
    return CVResult(tuple(fold_rmses), float(np.mean(fold_rmses)), k, seed)


# ---------------------------------------------------------------------------
# per-topic significance

def topic_correlations(theta: FeatureMatrix | np.ndarray, y) -> tuple[np.ndarray, np.ndarray]:
    """Pearson r and p for each column; zero-variance columns give r = 0, p = 1."""
    theta = _as_matrix(theta)
    y = np.asarray(y, dtype=float)
    K = theta.shape[1]
    r = np.zeros(K)
    p = np.ones(K)
    for j in range(K):
        col = theta.values[:, j]
        if np.ptp(col) == 0.0:
            warnings.warn(f"column {theta.column_names[j]!r} has zero variance; skipped", stacklevel=2)
            continue
        r[j], p[j] = pearson(col, y)
    return r, p


def significant_topic_summary(theta: FeatureMatrix | np.ndarray, y, alpha_level: float = 0.01) -> tuple[int, float]:
    """Number of columns correlated with y at ``p < alpha_level`` and the largest |r|."""
    if not 0.0 < alpha_level < 1.0:
        raise StatsError("alpha_level must lie in (0, 1)")
    r, p = topic_correlations(theta, y)
    return int(np.sum(p < alpha_level)), float(np.max(np.abs(r))) if r.size else 0.0
