import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from moonvol.exceptions import CollinearityError, DegenerateColumnError, InsufficientDataError
from moonvol.regress import (
    MODELS,
    NestedModelSuite,
    OLSRegressor,
    build_design_matrix,
    correlation,
    fit_ols,
    fit_suite,
    pearson_matrix,
)

from helpers import random_rows
from oracles import ols_normal_equations

NESTING = [
    ("M2", "M1"), ("M3", "M1"), ("M4", "M2"), ("M4", "M3"), ("M5", "M1"),
    ("M6", "M1"), ("M7", "M5"), ("M7", "M6"), ("M8", "M4"), ("M8", "M7"),
]


def test_models_are_nested():
    for big, small in NESTING:
        assert set(MODELS[small].regressors) < set(MODELS[big].regressors)
    assert MODELS["M8"].columns == ("const", "V_lag", "M_lag", "VIX_lag", "MOON1_lag", "MOON2_lag", "YOLO1_lag", "YOLO2_lag")


class TestDesignMatrix:
    def test_lag_construction(self):
        rows = random_rows(np.random.default_rng(0), n=10)
        d = build_design_matrix(rows, MODELS["M1"])
        assert d.targets.shape == (9,) and d.predictors.shape == (9, 4)
        assert d.targets[0] == rows[1].v
        np.testing.assert_array_equal(d.predictors[0], [1.0, rows[0].v, rows[0].m, rows[0].vix])
        assert d.dates[0] == rows[1].date

    def test_too_few_rows(self):
        rows = random_rows(np.random.default_rng(0), n=3)
        with pytest.raises(InsufficientDataError, match="at least 9"):
            build_design_matrix(rows, MODELS["M8"])

    def test_minimal_lag_pair(self):
        rows = random_rows(np.random.default_rng(0), n=2)
        d = build_design_matrix(rows, MODELS["M1"], min_rows=2)
        assert d.targets.tolist() == [rows[1].v]
        assert d.predictors.tolist() == [[1.0, rows[0].v, rows[0].m, rows[0].vix]]


class TestFitOls:
    def test_exact_line(self):
        x = np.arange(6.0)
        res = fit_ols(1 + 2 * x, np.column_stack([np.ones(6), x]), ["const", "x"])
        assert res.coefficients["const"] == pytest.approx(1.0)
        assert res.coefficients["x"] == pytest.approx(2.0)
        assert res.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_three_points(self):
        X = np.column_stack([np.ones(3), [0.0, 1.0, 2.0]])
        res = fit_ols([0.0, 1.0, 3.0], X, ["const", "x"])
        assert res.coefficients["x"] == pytest.approx(1.5, abs=1e-13)
        assert res.coefficients["const"] == pytest.approx(-1 / 6, abs=1e-13)
        assert abs(res.r_squared - 27 / 28) < 1e-12

    def test_duplicate_column(self):
        x = np.arange(5.0)
        with pytest.raises(CollinearityError) as err:
            fit_ols(x**2, np.column_stack([np.ones(5), x, x]), ["const", "a", "b"])
        assert err.value.columns and set(err.value.columns) <= {"a", "b"}

    def test_constant_target(self):
        with pytest.raises(DegenerateColumnError):
            fit_ols(np.ones(4), np.column_stack([np.ones(4), np.arange(4.0)]))

    def test_oracle_agreement(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            n, p = int(rng.integers(5, 51)), int(rng.integers(1, 4))
            X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))]) if p > 1 else np.ones((n, 1))
            y = X @ rng.normal(size=p) + rng.normal(size=n)
            got = list(fit_ols(y, X).coefficients.values())
            ref = [float(b) for b in ols_normal_equations(X.tolist(), y.tolist())]
            np.testing.assert_allclose(got, ref, rtol=0, atol=1e-8)

    @given(st.integers(0, 2**32 - 1), st.floats(-50, 50).filter(lambda a: abs(a) > 1e-2), st.floats(-50, 50))
    def test_affine_invariance_and_orthogonality(self, seed, a, b):
        rng = np.random.default_rng(seed)
        n = 30
        X = np.column_stack([np.ones(n), rng.normal(size=(n, 3))])
        y = X @ rng.normal(size=4) + rng.normal(size=n)
        base = fit_ols(y, X)
        X2 = X.copy()
        X2[:, 2] = a * X2[:, 2] + b
        moved = fit_ols(y, X2)
        np.testing.assert_allclose(moved.fitted, base.fitted, atol=1e-9)
        assert moved.r_squared == pytest.approx(base.r_squared, abs=1e-9)
        for j in range(X.shape[1]):
            assert abs(base.residuals @ X[:, j]) < 1e-8 * n * np.linalg.norm(X[:, j])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_nesting_monotonicity(seed, noise_only):
    res = fit_suite(random_rows(np.random.default_rng(seed), n=25, noise_only=noise_only))
    assert len({r.n_obs for r in res.values()}) == 1
    for big, small in NESTING:
        assert res[big].r_squared >= res[small].r_squared - 1e-10


class TestPearson:
    def test_examples(self):
        assert correlation([[1, 6], [2, 4], [3, 2]])[0, 1] == pytest.approx(-1.0)
        rows = random_rows(np.random.default_rng(1))
        assert pearson_matrix(rows, ["v", "v"])[0, 1] == pytest.approx(1.0)

    def test_constant_column(self):
        with pytest.raises(DegenerateColumnError, match="'b'"):
            correlation([[1, 5], [2, 5], [3, 5]], ["a", "b"])

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-100, 100))
    def test_properties(self, seed, a, b):
        data = np.random.default_rng(seed).normal(size=(20, 4))
        c = correlation(data)
        np.testing.assert_array_equal(c, c.T)
        assert np.all(np.diag(c) == 1.0) and np.all(np.abs(c) <= 1.0)
        moved = data.copy()
        moved[:, 1] = a * moved[:, 1] + b
        np.testing.assert_allclose(correlation(moved), c, atol=1e-9)


class TestEstimators:
    def test_ols_regressor(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 2))
        y = 3 + X @ [1.5, -2.0]
        est = OLSRegressor().fit(X, y)
        assert est.intercept_ == pytest.approx(3.0)
        np.testing.assert_allclose(est.coef_, [1.5, -2.0])
        assert est.score(X, y) == pytest.approx(1.0)
        np.testing.assert_allclose(est.predict(X[:3]), y[:3])
        assert clone(est).get_params() == {"fit_intercept": True, "rank_tol": 1e-10}

    def test_without_intercept(self):
        X = np.arange(1.0, 6.0).reshape(-1, 1)
        est = OLSRegressor(fit_intercept=False).fit(X, 2 * X.ravel())
        assert est.intercept_ == 0.0 and est.coef_[0] == pytest.approx(2.0)

    def test_suite(self):
        rows = random_rows(np.random.default_rng(4), n=60)
        suite = NestedModelSuite().fit(rows)
        assert list(suite.r2_) == list(MODELS) and suite.n_obs_ == 59
        assert suite.best() == ["M8"]
        small = NestedModelSuite(models=("M1", "M5")).fit(rows)
        assert set(small.results_) == {"M1", "M5"}
