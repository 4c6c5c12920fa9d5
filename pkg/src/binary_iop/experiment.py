"""End-to-end pipeline: synthesize data, sample, fit, and write the report files."""

from __future__ import annotations

import dataclasses
import logging
import platform
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig
from .grid_pde import observe, solve_forward
from .inference import PosteriorSpec, calibrate_sigma_eps, conditional_mean, run_chain
from .lm import lm_solve
from .report import (
    build_drift_curve,
    build_recovery_table,
    chain_summary,
    write_drift,
    write_histograms,
    write_summary,
    write_table,
    write_trace,
)
from .synthetic import NoiseSpec, generate

logger = logging.getLogger(__name__)


def _fmt_level(level: float) -> str:
    return f"{level:g}"


@dataclass
class CellResult:
    level_index: int
    guess_index: int
    level: float
    start: np.ndarray
    chain_seed: int
    sigma_eps: float
    chain: object = None
    lm: object = None
    error: str | None = None
    stage: str | None = None


@dataclass
class ExperimentResult:
    status: int
    output_dir: Path
    cells: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _versions() -> dict:
    import numba
    import scipy

    return {
        "binary_iop": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _run_cell(config: ExperimentConfig, data, cell: CellResult, lm_executor=None) -> CellResult:
    spec = PosteriorSpec(data, config.grid, config.truth.r, config.prior, cell.sigma_eps)
    cell.stage = "mcmc"
    try:
        s = config.sampler
        cell.chain = run_chain(
            spec, cell.start, s.k_total, s.k_burn, s.gamma, cell.chain_seed, adapt=s.adapt
        )
        if config.lm.enabled:
            cell.stage = "lm"
            cell.lm = lm_solve(spec, cell.start, config.lm.settings(), executor=lm_executor)
        cell.stage = None
    except Exception as exc:  # reported per cell; other cells keep running
        cell.error = f"{type(exc).__name__}: {exc}"
        logger.debug(traceback.format_exc())
    return cell


def _star(args):
    return _run_cell(*args)


def run_experiment(
    config: ExperimentConfig,
    output: str | Path | None = None,
    jobs: int = 1,
    quiet: bool = False,
) -> ExperimentResult:
    """
    Run every (noise level x initial guess) cell and write the artifacts.

    Returns an ExperimentResult whose ``status`` is 0 on success and 2 if any
    stage failed. Partial outputs are kept and the manifest is marked FAILED.
    """
    outdir = Path(output or config.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    say = (lambda *a: None) if quiet else print
    result = ExperimentResult(status=0, output_dir=outdir)
    manifest = {
        "manifest_version": 1,
        "status": "RUNNING",
        "versions": _versions(),
        "config": config.to_dict(),
        "warnings": list(config.warnings),
        "rng": "numpy PCG64 via default_rng(seed); normals by ziggurat",
        "cells": [],
    }
    for w in config.warnings:
        logger.warning(w)

    truth = config.truth.params
    points = config.points()
    datasets = []
    try:
        for i, level in enumerate(config.noise.levels):
            ms = generate(
                truth,
                config.grid,
                points,
                NoiseSpec(level, config.noise.seed_for(i)),
                drift=config.truth.drift,
            )
            ms.to_csv(outdir / f"data_{config.name}_noise{_fmt_level(level)}.csv")
            datasets.append(ms)
    except Exception as exc:
        result.status = 2
        result.failures.append(f"synthetic: {type(exc).__name__}: {exc}")
        manifest["status"] = "FAILED"
        manifest["failures"] = result.failures
        (outdir / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
        return result

    starts = config.start_points()
    jobs_list = []
    for i, (level, ms) in enumerate(zip(config.noise.levels, datasets)):
        sigma_eps = config.sampler.sigma_eps or calibrate_sigma_eps(
            ms.values, level, config.sampler.sigma_eps_floor
        )
        for j, start in enumerate(starts):
            cell = CellResult(i, j, level, start, config.sampler.seed_for(i, j), sigma_eps)
            jobs_list.append((config, ms.observed(), cell))

    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_star, jobs_list))
    elif jobs > 1:
        # a single cell: spread the LM Jacobian columns instead
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = [_run_cell(*jobs_list[0], lm_executor=pool)]
    else:
        cells = []
        for args in jobs_list:
            c = args[2]
            say(f"[{config.name}] noise={_fmt_level(c.level)} init={c.start.tolist()} ...")
            cells.append(_run_cell(*args))
    result.cells = cells

    notes = []
    for c in cells:
        name = f"{config.name}_init{c.guess_index}_noise{_fmt_level(c.level)}"
        entry = {
            "name": name,
            "noise_level": c.level,
            "data_seed": config.noise.seed_for(c.level_index),
            "chain_seed": c.chain_seed,
            "start": c.start.tolist(),
            "sigma_eps": c.sigma_eps,
            "status": "OK",
        }
        if c.error:
            entry["status"] = "FAILED"
            entry["stage"] = c.stage
            entry["error"] = c.error
            result.failures.append(f"{name} [{c.stage}]: {c.error}")
        if c.chain is not None:
            write_trace(outdir, name, c.chain)
            write_histograms(outdir, name, c.chain, config.output.hist_bins)
            entry["acceptance_rate"] = c.chain.acceptance_rate
            entry["final_gamma"] = c.chain.proposal_gamma.tolist()
            entry["conditional_mean"] = conditional_mean(c.chain).tolist()
            notes.append(chain_summary(name, c.chain))
        if c.lm is not None:
            c.lm.to_csv(outdir / f"lm_{name}.csv")
            entry["lm_result"] = c.lm.theta_final.tolist()
            entry["lm_termination"] = c.lm.termination_reason
            notes.append(
                f"{name}: LM {c.lm.termination_reason} after {c.lm.iterations} iterations, "
                f"residual {c.lm.residual_history[-1]:.3e}"
            )
        manifest["cells"].append(entry)

    expected = config.truth.expected
    for j, guess in enumerate(config.initial_guesses):
        runs, curves = [], {}
        for c in (c for c in cells if c.guess_index == j):
            lvl = _fmt_level(c.level * 100)
            if c.chain is not None:
                label = f"Mean value (with {lvl}% noise)"
                cm = conditional_mean(c.chain)
                runs.append({"label": label, "method": "MCMC", "noise": c.level, "init": c.start, "theta": cm})
                curves[f"MCMC {lvl}%"] = cm
            if c.lm is not None:
                label = f"Result of LM with {lvl}% noise"
                runs.append({"label": label, "method": "LM", "noise": c.level, "init": c.start, "theta": c.lm.theta_final})
                curves[f"LM {lvl}%"] = c.lm.theta_final
        if not runs:
            continue
        tname = f"{config.name}_init{j}"
        table = build_recovery_table(runs, expected, tname, initial_guess=guess)
        write_table(outdir, table)
        result.tables.append(table)
        curve = build_drift_curve(
            curves,
            config.output.drift_range,
            config.output.drift_samples,
            exact={"truth": config.truth.exact_curve},
        )
        write_drift(outdir, tname, curve)

    write_summary(outdir, result.tables, list(config.warnings) + notes)
    for t in result.tables:
        say(f"\n{t.name}\n{t.to_text()}")

    if result.failures:
        result.status = 2
        manifest["status"] = "FAILED"
        manifest["failures"] = result.failures
    else:
        manifest["status"] = "OK"
    (outdir / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    return result


def run_forward(config: ExperimentConfig, output: str | Path | None = None) -> Path:
    """Solve the truth forward and write the tau_star profile and clean data."""
    outdir = Path(output or config.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    sol = solve_forward(config.truth.params, config.grid, drift=config.truth.drift)
    path = outdir / f"forward_{config.name}.csv"
    vals = observe(sol, config.grid.y)
    with open(path, "w") as fh:
        fh.write("y,value\n")
        for y, v in zip(config.grid.y, vals):
            fh.write(f"{float(y)!r},{float(v)!r}\n")
    return path


def replace_seeds(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(
        config,
        noise=dataclasses.replace(config.noise, seed=seed),
        sampler=dataclasses.replace(config.sampler, seed=seed),
    )
