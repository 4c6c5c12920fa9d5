"""Bayesian recovery of drift and volatility from binary-option prices."""

__version__ = "0.1.0"

from .grid_pde import (
    CnCoefficients,
    GridSpec,
    ModelParams,
    PdeSolution,
    TridiagonalSystem,
    ZeroPivotError,
    assemble_cn,
    drift_eval,
    observe,
    solve_forward,
    step,
)
from .inference import (
    Chain,
    PosteriorSpec,
    PriorBox,
    calibrate_sigma_eps,
    conditional_mean,
    log_posterior,
    mh_step,
    posterior_histogram,
    run_chain,
)
from .lm import LmResult, LmSettings, jacobian_fd, lm_solve
from .synthetic import MeasurementSet, NoiseSpec, Observations, generate

__all__ = [
    "Chain",
    "CnCoefficients",
    "GridSpec",
    "LmResult",
    "LmSettings",
    "MeasurementSet",
    "ModelParams",
    "NoiseSpec",
    "Observations",
    "PdeSolution",
    "PosteriorSpec",
    "PriorBox",
    "TridiagonalSystem",
    "ZeroPivotError",
    "assemble_cn",
    "calibrate_sigma_eps",
    "conditional_mean",
    "drift_eval",
    "generate",
    "jacobian_fd",
    "lm_solve",
    "log_posterior",
    "mh_step",
    "observe",
    "posterior_histogram",
    "run_chain",
    "solve_forward",
    "step",
]
