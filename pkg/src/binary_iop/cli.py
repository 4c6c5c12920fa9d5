"""Command-line entry point: ``binary-iop {run,forward,validate,oracle}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import ConfigError, config_reference, dump_config, validate_config
from .experiment import replace_seeds, run_experiment, run_forward
from .grid_pde import GridSpec, ModelParams, solve_forward
from .oracle import digital_price, oracle_boundary

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(path, seed_override=None):
    config = validate_config(path)
    if seed_override is not None:
        config = replace_seeds(config, seed_override)
    return config


def cmd_run(args) -> int:
    config = _load(args.config, args.seed_override)
    result = run_experiment(config, output=args.output, jobs=args.jobs, quiet=args.quiet)
    for f in result.failures:
        print(f"error: {f}", file=sys.stderr)
    if not args.quiet:
        print(f"\nartifacts written to {result.output_dir}")
    return EXIT_OK if result.status == 0 else EXIT_RUNTIME


def cmd_forward(args) -> int:
    config = _load(args.config, args.seed_override)
    path = run_forward(config, args.output)
    if not args.quiet:
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load(args.config, args.seed_override)
    for w in config.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not args.quiet:
        print(dump_config(config), end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    grid = GridSpec(n_y=args.n_y, n_tau=args.n_tau, tau_star=args.tau_star)
    params = ModelParams(0.0, 0.0, 0.0, args.sigma0, args.r)
    y = grid.y
    mask = np.abs(y) <= args.window
    exact = digital_price(y, grid.tau_star, args.sigma0, args.r)
    rows = []
    for label, bnd in [
        ("fixed (1, 0)", "fixed"),
        ("discounted (exp(-r tau), 0)", "discounted"),
        ("analytic", oracle_boundary(args.sigma0, args.r, grid)),
    ]:
        err = np.abs(solve_forward(params, grid, boundary=bnd).final - exact)[mask].max()
        rows.append((label, err))
    fine = grid.refined()
    err_fine = np.abs(
        solve_forward(params, fine, boundary=oracle_boundary(args.sigma0, args.r, fine)).final
        - digital_price(fine.y, fine.tau_star, args.sigma0, args.r)
    )[np.abs(fine.y) <= args.window].max()
    print(
        f"theta=0, sigma0={args.sigma0}, r={args.r}, tau*={grid.tau_star}, "
        f"n_y={grid.n_y}, n_tau={grid.n_tau}; max error on |y| <= {args.window}"
    )
    for label, err in rows:
        print(f"  boundary {label:<30s} {err:.3e}")
    print(f"  refined grid (dy/2, dtau/4), analytic boundary {err_fine:.3e}  ratio {rows[-1][1] / err_fine:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", metavar="DIR", help="output directory (overrides output.directory)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel experiment cells")
    common.add_argument("--seed-override", type=int, metavar="S", help="replace noise and sampler seeds")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(
        prog="binary-iop",
        description="Recover drift and volatility from binary-option prices by MCMC and LM.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=config_reference(),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in [
        ("run", cmd_run, "run the full experiment"),
        ("forward", cmd_forward, "forward solve at the configured truth only"),
        ("validate", cmd_validate, "check a config file and print it with defaults filled in"),
    ]:
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        p.add_argument("config", help="YAML experiment file (or a run manifest)")
        p.set_defaults(func=fn)

    p = sub.add_parser("oracle", parents=[common], help="compare the solver with the analytic digital price")
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--n-y", type=int, default=100)
    p.add_argument("--n-tau", type=int, default=400)
    p.add_argument("--tau-star", type=float, default=0.4)
    p.add_argument("--window", type=float, default=1.0, help="compare on |y| <= window")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
