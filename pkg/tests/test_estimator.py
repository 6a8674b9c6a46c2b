import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning, NotFittedError
from sklearn.linear_model import Lasso
from sklearn.utils.estimator_checks import check_estimator

from asyflexa import AsyncSCALasso


def data(m=80, n=30, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n))
    w = np.zeros(n)
    k = min(5, n)
    w[:k] = rng.standard_normal(k) * 3
    y = X @ w + 0.1 * rng.standard_normal(m) + 2.0
    return X, y


@pytest.mark.parametrize("scheduler, delay", [("cyclic", 0), ("shared-uniform", 4), ("random-parallel", 3)])
def test_matches_sklearn_lasso(scheduler, delay):
    X, y = data()
    ref = Lasso(alpha=0.1, tol=1e-12, max_iter=100000).fit(X, y)
    est = AsyncSCALasso(alpha=0.1, n_blocks=6, scheduler=scheduler, delay=delay, max_iter=20000, tol=1e-10).fit(X, y)
    assert np.max(np.abs(est.coef_ - ref.coef_)) <= 1e-6
    assert est.intercept_ == pytest.approx(ref.intercept_, abs=1e-6)
    assert est.stationarity_ <= 1e-10
    assert est.score(X, y) == pytest.approx(ref.score(X, y), abs=1e-9)


def test_without_intercept():
    X, y = data(seed=1)
    ref = Lasso(alpha=0.05, fit_intercept=False, tol=1e-12, max_iter=100000).fit(X, y)
    est = AsyncSCALasso(alpha=0.05, n_blocks=5, fit_intercept=False, max_iter=20000, tol=1e-10).fit(X, y)
    assert est.intercept_ == 0.0
    assert np.max(np.abs(est.coef_ - ref.coef_)) <= 1e-6


def test_threaded_engine_fit():
    X, y = data(seed=2)
    ref = Lasso(alpha=0.1, tol=1e-12, max_iter=100000).fit(X, y)
    est = AsyncSCALasso(alpha=0.1, n_blocks=6, engine="threaded", n_workers=2, delay=1, max_iter=4000,
                        tol=1e-8).fit(X, y)
    assert np.max(np.abs(est.coef_ - ref.coef_)) <= 1e-5
    assert est.trace_.extra["torn_reads"] == 0


def test_convergence_warning_and_attributes():
    X, y = data()
    with pytest.warns(ConvergenceWarning):
        est = AsyncSCALasso(alpha=0.1, max_iter=2, tol=1e-12).fit(X, y)
    assert est.n_iter_ == 2
    assert est.n_features_in_ == X.shape[1]
    assert est.predict(X).shape == (X.shape[0],)


def test_bad_parameters():
    X, y = data()
    with pytest.raises(ValueError):
        AsyncSCALasso(alpha=-1.0).fit(X, y)
    with pytest.raises(ValueError):
        AsyncSCALasso(engine="gpu").fit(X, y)
    with pytest.raises(NotFittedError):
        AsyncSCALasso().predict(X)


def test_clone_and_params():
    est = AsyncSCALasso(alpha=0.3, n_blocks=4, delay=2)
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(alpha=0.7)
    assert est.alpha == 0.3 and c.alpha == 0.7


def test_more_blocks_than_features():
    X, y = data(n=3)
    est = AsyncSCALasso(alpha=0.01, n_blocks=10, max_iter=5000, tol=1e-10).fit(X, y)
    assert est.trace_.extra["N"] == 3


def test_constant_design_gives_zero_coefficients():
    X = np.ones((4, 3))
    est = AsyncSCALasso(alpha=0.1).fit(X, np.arange(4.0))
    assert np.array_equal(est.coef_, np.zeros(3))
    assert est.intercept_ == pytest.approx(1.5)


def test_sklearn_estimator_checks():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        check_estimator(AsyncSCALasso(alpha=0.01, n_blocks=2, max_iter=200, tol=1e-6))
