"""Levenberg-Marquardt least-squares baseline with finite-difference Jacobians."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid_pde import ModelParams, ZeroPivotError
from .inference import PARAM_NAMES


@dataclass(frozen=True)
class LmSettings:
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    max_iters: int = 200
    tol_step: float = 1e-8
    tol_grad: float = 1e-8
    fd_step: float = 1e-5
    lambda_max: float = 1e16
    project: bool = False

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be non-negative")
        if not (self.lambda_up > 1 > self.lambda_down > 0):
            raise ValueError("need lambda_up > 1 > lambda_down > 0")
        if min(self.tol_step, self.tol_grad, self.fd_step) <= 0:
            raise ValueError("tolerances and fd_step must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class LmResult:
    theta_final: np.ndarray
    iterations: int
    converged: bool
    termination_reason: str
    residual_history: list = field(default_factory=list)
    theta_history: list = field(default_factory=list)
    lambda_history: list = field(default_factory=list)

    def params(self, r: float) -> ModelParams:
        return ModelParams.from_vector(self.theta_final, r)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", *PARAM_NAMES, "residual", "lambda"])
            for k, (th, res, lam) in enumerate(
                zip(self.theta_history, self.residual_history, self.lambda_history)
            ):
                w.writerow([k, *(repr(float(v)) for v in th), repr(float(res)), repr(float(lam))])


def _predict(spec, theta) -> np.ndarray:
    # sigma0 enters the forward model squared; non-positive values are not evaluated
    if theta[3] <= 0:
        raise ValueError("sigma0 must stay positive")
    out = np.asarray(spec.predict(theta), dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("forward model returned non-finite values")
    return out


def jacobian_fd(spec, theta, fd_step: float = 1e-5, executor=None) -> np.ndarray:
    """
    Central-difference sensitivities of the forward model.

    Column ``p`` is ``(F(theta + h e_p) - F(theta - h e_p)) / (2 h)`` with
    ``h = fd_step * max(1, |theta_p|)``. For sigma0 the step is shrunk so the
    lower point stays positive. ``executor`` (a concurrent.futures executor)
    spreads the forward solves over workers.
    """
    theta = np.asarray(theta.theta if isinstance(theta, ModelParams) else theta, dtype=float)
    dim = theta.size
    steps = fd_step * np.maximum(1.0, np.abs(theta))
    if theta[3] > 0:
        steps[3] = min(steps[3], 0.5 * theta[3])
    points = []
    for p in range(dim):
        e = np.zeros(dim)
        e[p] = steps[p]
        points += [theta + e, theta - e]
    try:
        if executor is None:
            evals = [_predict(spec, x) for x in points]
        else:
            evals = list(executor.map(_predict, [spec] * len(points), points))
    except (ZeroPivotError, ValueError) as exc:
        raise type(exc)(f"Jacobian evaluation failed: {exc}") from exc
    cols = [(evals[2 * p] - evals[2 * p + 1]) / (2.0 * steps[p]) for p in range(dim)]
    return np.column_stack(cols)


def lm_direction(jac, resid, lam: float) -> np.ndarray:
    """Solve ``(J^T J + lam I) delta = J^T resid``."""
    jtj = jac.T @ jac
    g = jac.T @ resid
    return np.linalg.solve(jtj + lam * np.eye(jtj.shape[0]), g)


def lm_solve(spec, init, settings: LmSettings | None = None, executor=None) -> LmResult:
    """
    Damped Gauss-Newton iteration

        theta <- theta + (J^T J + lam I)^{-1} J^T (Y - F(theta)).

    A trial step is kept only if it lowers ``|Y - F|``; then ``lam`` is
    multiplied by ``lambda_down``. Otherwise ``lam`` grows by ``lambda_up``
    and the step is retried from the same point. Steps that would make
    sigma0 non-positive or break the forward solve count as failures.

    ``spec`` needs ``predict(theta)`` and ``observed``; a PosteriorSpec
    works. With ``settings.project`` the iterate is clipped to
    ``spec.prior`` after each step.
    """
    s = settings or LmSettings()
    theta = np.asarray(init.theta if isinstance(init, ModelParams) else init, dtype=float).copy()
    if not np.all(np.isfinite(theta)):
        raise ValueError("initial guess must be finite")
    box = getattr(spec, "prior", None) if s.project else None
    if box is not None:
        theta = box.project(theta)
    y = np.asarray(spec.observed, dtype=float)

    try:
        resid = y - _predict(spec, theta)
    except (ZeroPivotError, ValueError) as exc:
        return LmResult(theta, 0, False, f"initial evaluation failed: {exc}")
    cost = float(resid @ resid)
    lam = s.lambda0
    result = LmResult(theta.copy(), 0, False, "max_iters")
    result.theta_history.append(theta.copy())
    result.residual_history.append(math.sqrt(cost))
    result.lambda_history.append(lam)

    it = 0
    while it < s.max_iters:
        try:
            jac = jacobian_fd(spec, theta, s.fd_step, executor)
        except (ZeroPivotError, ValueError) as exc:
            result.termination_reason = f"jacobian failed: {exc}"
            break
        grad = jac.T @ resid
        if np.max(np.abs(grad)) <= s.tol_grad:
            result.converged = True
            result.termination_reason = "gradient"
            break

        it += 1
        improved = False
        while lam <= s.lambda_max:
            try:
                delta = lm_direction(jac, resid, lam)
            except np.linalg.LinAlgError:
                lam = max(lam, 1e-12) * s.lambda_up
                continue
            trial = theta + delta
            if box is not None:
                trial = box.project(trial)
            try:
                trial_resid = y - _predict(spec, trial)
                trial_cost = float(trial_resid @ trial_resid)
            except (ZeroPivotError, ValueError):
                trial_cost = math.inf
            if trial_cost < cost:
                step_norm = float(np.linalg.norm(trial - theta))
                theta, resid, cost = trial, trial_resid, trial_cost
                lam *= s.lambda_down
                improved = True
                break
            lam = max(lam, 1e-12) * s.lambda_up

        if not improved:
            result.termination_reason = "damping_overflow"
            break
        result.theta_history.append(theta.copy())
        result.residual_history.append(math.sqrt(cost))
        result.lambda_history.append(lam)
        if step_norm <= s.tol_step * (np.linalg.norm(theta) + s.tol_step):
            result.converged = True
            result.termination_reason = "step"
            break

    result.theta_final = theta
    result.iterations = it
    return result
