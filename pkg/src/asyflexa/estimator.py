"""scikit-learn style LASSO estimator backed by the asynchronous block solver."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted, validate_data

from .engine import RunConfig, run_simulated, run_threaded
from .problem import BlockPartition, L1Reg, LeastSquares, ProblemSpec
from .scheduler import SchedulerConfig


class AsyncSCALasso(RegressorMixin, BaseEstimator):
    """LASSO, ``(1 / (2 m)) ||y - X w||^2 + alpha ||w||_1``, solved by asynchronous block SCA.

    Parameters
    ----------
    alpha : float
        l1 weight.
    n_blocks : int
        Number of contiguous coefficient blocks (capped at ``n_features``).
    engine : {"sim", "threaded"}
        Simulated delays on one thread, or real worker threads.
    scheduler : str
        Scheduler kind of the simulated engine.
    delay : int
        Maximum delay of the simulated engine.
    n_workers : int
        Worker threads of the threaded engine.
    gamma : float or "auto"
    surrogate : str
        ``prox_linear`` (closed-form updates) or ``second_order``.
    beta : float, optional
        Proximal weight; half the Lipschitz constant when omitted.
    max_iter : int
        Budget in epochs; one epoch is ``n_blocks`` block updates.
    tol : float
        Stop once the stationarity residual is at most ``tol``.
    fit_intercept : bool
    random_state : int
    """

    def __init__(self, alpha=1.0, n_blocks=10, engine="sim", scheduler="shared-uniform", delay=0,
                 n_workers=1, gamma="auto", surrogate="prox_linear", beta=None, max_iter=1000,
                 tol=1e-6, fit_intercept=True, random_state=0):
        self.alpha = alpha
        self.n_blocks = n_blocks
        self.engine = engine
        self.scheduler = scheduler
        self.delay = delay
        self.n_workers = n_workers
        self.gamma = gamma
        self.surrogate = surrogate
        self.beta = beta
        self.max_iter = max_iter
        self.tol = tol
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def _problem(self, X, y):
        m, n = X.shape
        part = BlockPartition.uniform(n, min(self.n_blocks, n))
        smooth = LeastSquares(X, y, part, scale=1.0 / m)
        return ProblemSpec(part, smooth, regs=[L1Reg(self.alpha) for _ in range(part.N)], name="lasso")

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.fit_intercept:
            x_mean, y_mean = X.mean(axis=0), y.mean()
            Xc, yc = X - x_mean, y - y_mean
        else:
            x_mean, y_mean = np.zeros(X.shape[1]), 0.0
            Xc, yc = X, y
        if not np.any(Xc):
            # the loss does not depend on w, so the l1 term alone decides
            self.coef_ = np.zeros(X.shape[1])
            self.intercept_ = float(y_mean)
            self.n_iter_, self.stationarity_, self.trace_ = 0, 0.0, None
            return self
        spec = self._problem(Xc, yc)
        seed = 0 if self.random_state is None else int(self.random_state)
        N = spec.N
        cfg = RunConfig(gamma=self.gamma, surrogate=self.surrogate, beta=self.beta,
                        budget=int(self.max_iter) * N, seed=seed, target_stationarity=self.tol,
                        metric_cadence=N, objective_cadence=N, workers=self.n_workers)
        if self.engine == "sim":
            kind = str(self.scheduler).replace("-", "_")
            workers = max(1, self.delay + 1) if kind == "random_parallel" else 1
            cfg.scheduler = SchedulerConfig(kind=kind, N=N, delta=int(self.delay), workers=min(workers, N),
                                            seed=seed)
            trace = run_simulated(spec, cfg)
        elif self.engine == "threaded":
            cfg.delay_estimate = max(int(self.delay), self.n_workers - 1)
            trace = run_threaded(spec, cfg)
        else:
            raise ValueError(f"engine must be 'sim' or 'threaded', got {self.engine!r}")
        if trace.status == "error":
            raise RuntimeError(trace.message)
        if trace.status == "censored" or (self.engine == "threaded" and trace.final_stationarity() > self.tol):
            warnings.warn(f"stopped after {self.max_iter} epochs with residual "
                          f"{trace.final_stationarity():.3e} > tol={self.tol}", ConvergenceWarning, stacklevel=2)
        self.coef_ = trace.x.copy()
        self.intercept_ = float(y_mean - x_mean @ self.coef_) if self.fit_intercept else 0.0
        self.n_iter_ = int(np.ceil(len(trace) / N))
        self.stationarity_ = trace.final_stationarity()
        self.trace_ = trace
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


__all__ = ["AsyncSCALasso"]
