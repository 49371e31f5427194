"""Command line: solve runs, lower-level point queries, lattice scans.

Exit codes are a stable contract: 0 success, 2 usage or configuration
error, 3 solver failure.  Configuration comes from one JSON file plus
flags; no environment variables are consulted, so the manifest echo is
the whole story of a run.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    fmt,
    make_snapshot_writer,
    write_bounds_csv,
    write_grid_csv,
    write_manifest,
    write_oracle_argmin_json,
    write_oracle_csv,
    write_solution_json,
    write_subproblems_csv,
)
from .config import build_setup, load_config
from .errors import ConfigError, SolverError
from .global_solver import run
from .oracle import scan


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilevelbnb",
        description="Global solver for inverse optimal control of elliptic PDEs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the branch-and-bound solver")
    p_solve.add_argument("--config", required=True, help="JSON run configuration")
    p_solve.add_argument("--out", required=True, help="artifact output directory")
    p_solve.add_argument(
        "--threads", type=int, default=1, help="worker threads for bound evaluation"
    )
    p_solve.add_argument(
        "--snapshot-every",
        type=int,
        default=0,
        metavar="N",
        help="write a triangulation snapshot every N iterations (0: final only)",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_low = sub.add_parser(
        "lower-level", help="solve the lower level at one weight vector"
    )
    p_low.add_argument("--config", required=True, help="JSON run configuration")
    p_low.add_argument(
        "--beta", required=True, help="comma-separated weights, e.g. 0.6,0.3"
    )
    p_low.add_argument("--state-csv", help="dump the optimal state to this CSV")
    p_low.add_argument("--control-csv", help="dump the optimal control to this CSV")
    p_low.set_defaults(func=cmd_lower_level)

    p_or = sub.add_parser(
        "oracle", help="brute-force lattice scan of the reduced objective"
    )
    p_or.add_argument("--config", required=True, help="JSON run configuration")
    p_or.add_argument(
        "--grid", type=int, required=True, metavar="K", help="lattice points per axis"
    )
    p_or.add_argument("--out", default=".", help="output directory")
    p_or.set_defaults(func=cmd_oracle)
    return parser


def cmd_solve(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    if args.threads < 1:
        raise ConfigError(f"--threads must be positive, got {args.threads}")
    if args.snapshot_every < 0:
        raise ConfigError(
            f"--snapshot-every must be nonnegative, got {args.snapshot_every}"
        )
    config = load_config(args.config)
    setup = build_setup(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    try:
        result = run(
            setup.problem,
            setup.lower,
            config.solver,
            threads=args.threads,
            snapshot_every=args.snapshot_every,
            snapshot_writer=make_snapshot_writer(out, files),
        )
    except SolverError:
        # partial artifacts stay on disk; the manifest records the failure
        write_manifest(
            out / "manifest.json", args.config, config, files, started,
            status="solver_failure",
        )
        raise
    files.append(write_bounds_csv(out / "bounds.csv", result.history))
    files.append(write_subproblems_csv(out / "subproblems.csv", result.records))
    files.append(write_solution_json(out / "solution.json", result, config))
    write_manifest(
        out / "manifest.json", args.config, config, files, started, status="ok"
    )
    print(f"termination: {result.termination}")
    print(f"beta: [{', '.join(fmt(b) for b in result.beta_opt)}]")
    print(f"upper bound: {fmt(result.objective_value)}")
    print(f"lower bound: {fmt(result.lower_bound)}")
    print(f"gap: {fmt(result.gap)}")
    print(f"iterations: {result.iterations}, subproblems: {result.subproblems}")
    return 0


def cmd_lower_level(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    try:
        beta = np.array([float(tok) for tok in args.beta.split(",")])
    except ValueError:
        raise ConfigError(
            f"--beta must be comma-separated numbers, got {args.beta!r}"
        ) from None
    setup = build_setup(config)
    pr = setup.problem
    if beta.shape != pr.box_lower.shape:
        raise ConfigError(
            f"--beta has {beta.size} entries, the problem has {pr.box_lower.size}"
        )
    if np.any(beta < pr.box_lower) or np.any(beta > pr.box_upper):
        raise ConfigError(
            f"beta {beta.tolist()} lies outside the admissible box "
            f"[{pr.box_lower.tolist()}, {pr.box_upper.tolist()}]"
        )
    sol = setup.lower.solve(beta)
    grad = setup.lower.phi_gradient(sol)
    print(f"phi: {fmt(sol.phi)}")
    print(f"phi_gradient: [{', '.join(fmt(g) for g in grad)}]")
    print(
        f"active set: {sol.active_lower} controls at the lower bound, "
        f"{sol.active_upper} at the upper bound"
    )
    print(f"newton iterations: {sol.iterations}")
    if args.state_csv:
        write_grid_csv(Path(args.state_csv), pr.grid, sol.y)
    if args.control_csv:
        write_grid_csv(Path(args.control_csv), pr.grid, sol.u)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    setup = build_setup(config)
    lattice = scan(setup.problem, args.grid, budget=config.solver.oracle_budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_oracle_csv(out / "oracle.csv", lattice, setup.problem.n)
    write_oracle_argmin_json(out / "oracle_argmin.json", lattice)
    print(f"rows: {len(lattice.values)}")
    print(f"argmin index: {lattice.argmin_index}")
    print(f"argmin beta: [{', '.join(fmt(b) for b in lattice.argmin_beta)}]")
    print(f"min value: {fmt(lattice.min_value)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
