"""Lagged OLS volatility models M1-M8, R^2, and Pearson correlation matrices."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .exceptions import CollinearityError, DegenerateColumnError, InsufficientDataError, MoonvolError

RANK_TOL = 1e-10
BASELINE = ("v", "m", "vix")
LAG_NAMES = {
    "v": "V_lag",
    "m": "M_lag",
    "vix": "VIX_lag",
    "yolo1": "YOLO1_lag",
    "yolo2": "YOLO2_lag",
    "moon1": "MOON1_lag",
    "moon2": "MOON2_lag",
}
INTERCEPT = "const"


@dataclass(frozen=True)
class ModelSpec:
    name: str
    regressors: tuple[str, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return (INTERCEPT,) + tuple(LAG_NAMES[r] for r in self.regressors)


MODELS = {
    spec.name: spec
    for spec in (
        ModelSpec("M1", BASELINE),
        ModelSpec("M2", BASELINE + ("yolo1",)),
        ModelSpec("M3", BASELINE + ("yolo2",)),
        ModelSpec("M4", BASELINE + ("yolo1", "yolo2")),
        ModelSpec("M5", BASELINE + ("moon1",)),
        ModelSpec("M6", BASELINE + ("moon2",)),
        ModelSpec("M7", BASELINE + ("moon1", "moon2")),
        ModelSpec("M8", BASELINE + ("moon1", "moon2", "yolo1", "yolo2")),
    )
}
MODEL_NAMES = tuple(MODELS)


class DesignMatrix(NamedTuple):
    targets: np.ndarray
    predictors: np.ndarray
    columns: tuple[str, ...]
    dates: tuple[dt.date, ...]


@dataclass
class FitResult:
    coefficients: dict[str, float]
    r_squared: float
    n_obs: int
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    model: ModelSpec | None = None


def build_design_matrix(rows: Sequence, spec: ModelSpec, min_rows: int | None = None) -> DesignMatrix:
    """Pair each day's ``v`` with the previous row's regressors.

    Rows are consecutive trading days, so "previous row" is the lag. By
    default at least ``p + 2`` rows are required (``p`` regressors), which
    leaves more observations than coefficients; pass ``min_rows`` to relax.
    """
    need = len(spec.regressors) + 2 if min_rows is None else max(2, min_rows)
    if len(rows) < need:
        raise InsufficientDataError(f"{spec.name} needs at least {need} rows, got {len(rows)}")
    lagged = np.array([[r.get(c) for c in spec.regressors] for r in rows[:-1]], dtype=float)
    X = np.column_stack([np.ones(len(rows) - 1), lagged])
    y = np.array([r.v for r in rows[1:]], dtype=float)
    return DesignMatrix(y, X, spec.columns, tuple(r.date for r in rows[1:]))


def fit_ols(targets, predictors, columns: Sequence[str] | None = None, rank_tol: float = RANK_TOL) -> FitResult:
    """Least squares via column-pivoted QR.

    ``predictors`` must already contain the intercept column if one is
    wanted; R^2 is measured against the mean of ``targets``. Columns whose
    pivoted ``|R_ii|`` falls below ``rank_tol`` times the largest column
    norm are reported as collinear.
    """
    y = np.asarray(targets, dtype=float)
    X = np.asarray(predictors, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise MoonvolError(f"shape mismatch: predictors {X.shape}, targets {y.shape}")
    n, p = X.shape
    columns = tuple(columns) if columns is not None else tuple(f"x{i}" for i in range(p))
    if n < p:
        raise InsufficientDataError(f"{n} observations cannot identify {p} coefficients")
    Q, R, perm = linalg.qr(X, mode="economic", pivoting=True)
    tol = rank_tol * np.linalg.norm(X, axis=0).max()
    rank = int(np.sum(np.abs(np.diag(R)) > tol))
    if rank < p:
        dependent = [columns[i] for i in sorted(perm[rank:])]
        raise CollinearityError(f"rank {rank} < {p}; linearly dependent column(s): {', '.join(dependent)}", dependent)
    beta = np.empty(p)
    beta[perm] = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ beta
    residuals = y - fitted
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise DegenerateColumnError("targets are constant; R^2 is undefined")
    r2 = 1.0 - float(residuals @ residuals) / sst
    return FitResult(dict(zip(columns, beta.tolist())), r2, n, residuals, fitted)


def fit_model(rows: Sequence, spec: ModelSpec | str) -> FitResult:
    spec = MODELS[spec] if isinstance(spec, str) else spec
    design = build_design_matrix(rows, spec)
    result = fit_ols(design.targets, design.predictors, design.columns)
    result.model = spec
    return result


def fit_suite(rows: Sequence, models: Sequence[str] = MODEL_NAMES) -> dict[str, FitResult]:
    """Fit every model on the same rows so the R^2 values are comparable."""
    widest = max(len(MODELS[m].regressors) for m in models)
    if len(rows) < widest + 2:
        raise InsufficientDataError(f"model suite needs at least {widest + 2} rows, got {len(rows)}")
    return {name: fit_model(rows, name) for name in models}


def pearson_matrix(rows: Sequence, columns: Sequence[str]) -> np.ndarray:
    """Contemporaneous Pearson correlations between row attributes."""
    data = np.array([[r.get(c) for c in columns] for r in rows], dtype=float).reshape(len(rows), len(columns))
    return correlation(data, columns)


def correlation(data, columns: Sequence[str] | None = None) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    k = data.shape[1]
    columns = columns or [f"x{i}" for i in range(k)]
    if data.shape[0] < 2:
        raise InsufficientDataError("correlation needs at least 2 observations")
    centered = data - data.mean(axis=0)
    norms = np.sqrt(np.sum(centered**2, axis=0))
    for j in range(k):
        if np.ptp(data[:, j]) == 0.0 or norms[j] == 0.0:
            raise DegenerateColumnError(f"column {columns[j]!r} is constant")
    unit = centered / norms
    out = np.clip(unit.T @ unit, -1.0, 1.0)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return out


class OLSRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares with an intercept, solved by pivoted QR.

    Collinear inputs raise :class:`CollinearityError` instead of being
    silently regularized.
    """

    def __init__(self, fit_intercept=True, rank_tol=RANK_TOL):
        self.fit_intercept = fit_intercept
        self.rank_tol = rank_tol

    def _design(self, X):
        return np.column_stack([np.ones(len(X)), X]) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        names = [f"x{i}" for i in range(X.shape[1])]
        if self.fit_intercept:
            names = [INTERCEPT] + names
        self.result_ = fit_ols(y, self._design(X), names, self.rank_tol)
        beta = np.array(list(self.result_.coefficients.values()))
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[1:] if self.fit_intercept else beta
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_


class NestedModelSuite(BaseEstimator):
    """Fit a set of lagged models on one signal table.

    ``fit`` takes the ordered list of daily rows; afterwards ``results_``
    maps model name to :class:`FitResult` and ``r2_`` to its R^2.
    """

    def __init__(self, models=MODEL_NAMES):
        self.models = models

    def fit(self, rows, y=None):
        self.results_ = fit_suite(list(rows), tuple(self.models))
        self.r2_ = {name: res.r_squared for name, res in self.results_.items()}
        self.n_obs_ = next(iter(self.results_.values())).n_obs
        return self

    def best(self, decimals=None):
        """Names of the models with the highest R^2 (rounded if ``decimals`` given)."""
        check_is_fitted(self, "r2_")
        vals = {k: (round(v, decimals) if decimals is not None else v) for k, v in self.r2_.items()}
        top = max(vals.values())
        return [k for k, v in vals.items() if v == top]
