"""
scikit-learn compatible wrappers around the samplers and the LM fit.

``X`` holds log-moneyness measurement points (one column) and ``y`` the
observed binary-option prices at the observation horizon. ``predict``
returns model prices at new points from the fitted parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .grid_pde import GridSpec, ModelParams, observe, solve_forward
from .inference import (
    DEFAULT_GAMMA,
    SIGMA_EPS_FLOOR,
    PosteriorSpec,
    PriorBox,
    calibrate_sigma_eps,
    conditional_mean,
    run_chain,
)
from .lm import LmSettings, lm_solve
from .synthetic import Observations


class _DriftVolRegressor(RegressorMixin, BaseEstimator):
    def _grid(self) -> GridSpec:
        return GridSpec(self.y_min, self.y_max, self.n_y, self.n_tau, self.tau_star, self.boundary)

    def _prior(self) -> PriorBox:
        default = PriorBox()
        lo = default.lower if self.prior_lower is None else self.prior_lower
        hi = default.upper if self.prior_upper is None else self.prior_upper
        return PriorBox(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))

    def _observations(self, X, y) -> Observations:
        X, y = check_X_y(X, y, ensure_min_samples=1, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"X must have a single column of y locations, got {X.shape[1]}")
        self.n_features_in_ = 1
        order = np.argsort(X[:, 0], kind="stable")
        return Observations(X[order, 0], y[order])

    def _spec(self, data: Observations, sigma_eps: float) -> PosteriorSpec:
        return PosteriorSpec(data, self._grid(), self.r, self._prior(), sigma_eps)

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} feature, got {X.shape[1]}")
        return observe(solve_forward(self.params_, self._grid()), X[:, 0])

    def drift(self, y):
        """Fitted drift perturbation theta1 y + theta2 y^2 + theta3 y^3."""
        check_is_fitted(self, "params_")
        y = np.asarray(y, dtype=float)
        t = self.theta_
        return y * (t[0] + y * (t[1] + y * t[2]))


class MetropolisHastingsRegressor(_DriftVolRegressor):
    """
    Posterior-mean estimate of (theta1, theta2, theta3, sigma0).

    Parameters
    ----------
    r : float
        Known risk-free rate.
    y_min, y_max, n_y, n_tau, tau_star, boundary
        Forward-solver grid, see :class:`GridSpec`.
    prior_lower, prior_upper : array-like of shape (4,), optional
        Flat prior box; defaults to [-10, 10]^3 x [0.05, 10].
    init : array-like of shape (4,)
        Starting state, projected onto the prior box.
    k_total, k_burn : int
        Chain length and burn-in.
    gamma : array-like of shape (4,)
        Initial random-walk proposal scales.
    adapt : bool
        Rescale ``gamma`` during burn-in toward 20-45% acceptance.
    noise_level : float
        Relative noise level used to calibrate the likelihood scale when
        ``sigma_eps`` is None.
    sigma_eps : float, optional
        Likelihood noise scale in price units.
    random_state : int
        Seed of the chain.

    Attributes
    ----------
    chain_ : Chain
    theta_ : ndarray of shape (4,)
    params_ : ModelParams
    sigma_eps_ : float
    """

    def __init__(
        self,
        r=0.05,
        y_min=-1.5,
        y_max=1.5,
        n_y=100,
        n_tau=400,
        tau_star=0.4,
        boundary="fixed",
        prior_lower=None,
        prior_upper=None,
        init=(0.0, 0.0, 0.0, 0.05),
        k_total=100_000,
        k_burn=30_000,
        gamma=DEFAULT_GAMMA,
        adapt=True,
        noise_level=0.0,
        sigma_eps=None,
        sigma_eps_floor=SIGMA_EPS_FLOOR,
        random_state=0,
    ):
        self.r = r
        self.y_min = y_min
        self.y_max = y_max
        self.n_y = n_y
        self.n_tau = n_tau
        self.tau_star = tau_star
        self.boundary = boundary
        self.prior_lower = prior_lower
        self.prior_upper = prior_upper
        self.init = init
        self.k_total = k_total
        self.k_burn = k_burn
        self.gamma = gamma
        self.adapt = adapt
        self.noise_level = noise_level
        self.sigma_eps = sigma_eps
        self.sigma_eps_floor = sigma_eps_floor
        self.random_state = random_state

    def fit(self, X, y):
        data = self._observations(X, y)
        sigma_eps = self.sigma_eps or calibrate_sigma_eps(data.values, self.noise_level, self.sigma_eps_floor)
        spec = self._spec(data, sigma_eps)
        start = spec.prior.project(np.asarray(self.init, dtype=float))
        self.chain_ = run_chain(
            spec, start, self.k_total, self.k_burn, self.gamma, self.random_state, adapt=self.adapt
        )
        self.sigma_eps_ = sigma_eps
        self.theta_ = conditional_mean(self.chain_)
        self.params_ = ModelParams.from_vector(self.theta_, self.r)
        return self


class LevenbergMarquardtRegressor(_DriftVolRegressor):
    """Least-squares fit of (theta1, theta2, theta3, sigma0) by damped Gauss-Newton."""

    def __init__(
        self,
        r=0.05,
        y_min=-1.5,
        y_max=1.5,
        n_y=100,
        n_tau=400,
        tau_star=0.4,
        boundary="fixed",
        prior_lower=None,
        prior_upper=None,
        init=(0.0, 0.0, 0.0, 0.05),
        lambda0=1e-3,
        lambda_up=10.0,
        lambda_down=0.1,
        max_iters=200,
        tol_step=1e-8,
        tol_grad=1e-8,
        fd_step=1e-5,
        project=False,
    ):
        self.r = r
        self.y_min = y_min
        self.y_max = y_max
        self.n_y = n_y
        self.n_tau = n_tau
        self.tau_star = tau_star
        self.boundary = boundary
        self.prior_lower = prior_lower
        self.prior_upper = prior_upper
        self.init = init
        self.lambda0 = lambda0
        self.lambda_up = lambda_up
        self.lambda_down = lambda_down
        self.max_iters = max_iters
        self.tol_step = tol_step
        self.tol_grad = tol_grad
        self.fd_step = fd_step
        self.project = project

    def fit(self, X, y):
        data = self._observations(X, y)
        spec = self._spec(data, 1.0)
        settings = LmSettings(
            self.lambda0,
            self.lambda_up,
            self.lambda_down,
            self.max_iters,
            self.tol_step,
            self.tol_grad,
            self.fd_step,
            project=self.project,
        )
        self.result_ = lm_solve(spec, np.asarray(self.init, dtype=float), settings)
        self.theta_ = self.result_.theta_final
        self.n_iter_ = self.result_.iterations
        self.params_ = ModelParams.from_vector(self.theta_, self.r)
        return self
