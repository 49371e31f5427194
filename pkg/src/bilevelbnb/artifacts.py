"""Run artifacts: CSV/JSON emission with stable, documented layouts.

Every numeric CSV field is written with 17 significant digits so the
files round-trip to the exact binary doubles of the run.  Consumers
(plotting frontends, downstream analysis) rely only on these files, never
on solver internals.

Files of a solve run:

    bounds.csv              iter,subproblems,lb,ub,gap  (one row/iteration)
    triangulation_0007.csv  id,depth,status,lb,v0x,v0y,...  snapshot of all
                            leaf simplices at iteration 7, plus one final
                            row (id -1, status "incumbent") whose vertex
                            slots all carry the incumbent weights
    subproblems.csv         per-subproblem telemetry
    solution.json           incumbent, bounds, termination, config echo
    manifest.json           file inventory, timestamps, versions, status
"""

from __future__ import annotations

import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .geometry import DISMISSED, Simplex
from .oracle import LatticeResult

if TYPE_CHECKING:
    from .config import RunConfig
    from .global_solver import GlobalResult, IterationRow, SolverState, SubproblemRecord

# statuses of the triangulation snapshots; the incumbent pseudo-row uses
# "incumbent" on top of these
STATUS_DISMISSED = "dismissed"
STATUS_RELEVANT = "relevant"
STATUS_JUST_SPLIT = "just-split"
STATUS_GAP_CLOSED = "gap-closed"


def fmt(x: float) -> str:
    """Round-trip decimal form of a double."""
    return format(float(x), ".17g")


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_bounds_csv(path: Path, history: "list[IterationRow]") -> Path:
    path = Path(path)
    _write_rows(
        path,
        "iter,subproblems,lb,ub,gap",
        (
            (
                str(row.iteration),
                str(row.subproblems),
                fmt(row.lower_bound),
                fmt(row.upper_bound),
                fmt(row.gap),
            )
            for row in history
        ),
    )
    return path


def write_subproblems_csv(path: Path, records: "list[SubproblemRecord]") -> Path:
    path = Path(path)
    _write_rows(
        path,
        "uid,depth,gamma,penalized_value,slack,newton_iterations,gamma_evals",
        (
            (
                str(r.uid),
                str(r.depth),
                fmt(r.gamma),
                fmt(r.penalized_value),
                fmt(r.slack),
                str(r.newton_iterations),
                str(r.gamma_evals),
            )
            for r in records
        ),
    )
    return path


def snapshot_status(simplex: Simplex, state: "SolverState") -> str:
    """Snapshot-time classification of a leaf simplex.

    just-split wins over gap-closed: a fresh child's bound is inherited,
    not yet its own.
    """
    if simplex.status == DISMISSED:
        return STATUS_DISMISSED
    if simplex.created_iter >= state.iteration - 1 and simplex.depth > 0:
        return STATUS_JUST_SPLIT
    if (
        np.isfinite(state.upper_bound)
        and np.isfinite(simplex.lower_bound)
        and simplex.lower_bound >= state.upper_bound - state.params.gap_tol
    ):
        return STATUS_GAP_CLOSED
    return STATUS_RELEVANT


def write_triangulation_csv(path: Path, state: "SolverState") -> Path:
    path = Path(path)
    leaves = sorted(state.leaves(), key=lambda s: s.uid)
    n = state.problem.n
    axes = "xyzw"[:n] if n <= 4 else [f"a{i}" for i in range(n)]
    vert_cols = ",".join(f"v{j}{a}" for j in range(n + 1) for a in axes)

    def rows():
        for s in leaves:
            lb = s.lower_bound if np.isfinite(s.lower_bound) else 0.0
            coords = [fmt(c) for vertex in s.vertices for c in vertex]
            yield (str(s.uid), str(s.depth), snapshot_status(s, state), fmt(lb), *coords)
        if state.incumbent_beta is not None:
            coords = [fmt(c) for _ in range(n + 1) for c in state.incumbent_beta]
            yield ("-1", "-1", "incumbent", fmt(state.upper_bound), *coords)

    _write_rows(path, f"id,depth,status,lb,{vert_cols}", rows())
    return path


def make_snapshot_writer(out_dir: Path, written: list[Path] | None = None):
    """Writer callback for global_solver.run: one CSV per snapshot."""
    out_dir = Path(out_dir)

    def writer(state: "SolverState") -> None:
        path = out_dir / f"triangulation_{state.iteration:04d}.csv"
        write_triangulation_csv(path, state)
        if written is not None:
            written.append(path)

    return writer


def config_echo(config: "RunConfig") -> dict:
    """JSON-safe dict of the parsed configuration."""

    def clean(value):
        if isinstance(value, np.ndarray):
            return [float(v) for v in value]
        if isinstance(value, (np.floating, np.integer)):
            return value.item()
        if dataclasses.is_dataclass(value):
            return {k: clean(v) for k, v in dataclasses.asdict(value).items()}
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        return value

    echo = clean(config)
    echo.pop("raw", None)  # the validated fields above are the whole story
    return echo


def write_solution_json(path: Path, result: "GlobalResult", config: "RunConfig") -> Path:
    path = Path(path)
    payload = {
        "beta_opt": [float(b) for b in result.beta_opt],
        "objective_value": float(result.objective_value),
        "lower_bound": float(result.lower_bound),
        "gap": float(result.gap),
        "termination": result.termination,
        "iterations": result.iterations,
        "subproblems": result.subproblems,
        "config": config_echo(config),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def write_manifest(
    path: Path,
    config_path: str,
    config: "RunConfig",
    files: list[Path],
    started: datetime,
    status: str,
) -> Path:
    import scipy

    from . import __version__

    path = Path(path)
    payload = {
        "config_path": str(config_path),
        "config": config_echo(config),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "bilevelbnb": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "files": sorted({f.name for f in files} | {path.name}),
        "output_dir": str(path.parent),
        "status": status,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def write_oracle_csv(path: Path, lattice: LatticeResult, n: int) -> Path:
    """Lattice scan dump: one row per lattice point, K**n rows total."""
    path = Path(path)
    header = ",".join(f"beta{i}" for i in range(n)) + ",value"
    _write_rows(
        path,
        header,
        (
            tuple(fmt(c) for c in point) + (fmt(value),)
            for point, value in zip(lattice.points, lattice.values)
        ),
    )
    return path


def write_oracle_argmin_json(path: Path, lattice: LatticeResult) -> Path:
    path = Path(path)
    payload = {
        "argmin_index": lattice.argmin_index,
        "argmin_beta": [float(b) for b in lattice.argmin_beta],
        "min_value": lattice.min_value,
        "points_per_axis": lattice.points_per_axis,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def write_grid_csv(path: Path, grid, values) -> Path:
    """Grid function dump as i,j,value rows (interior node indices)."""
    path = Path(path)
    gi, gj = grid.node_indices()
    _write_rows(
        path,
        "i,j,value",
        ((str(i), str(j), fmt(v)) for i, j, v in zip(gi, gj, np.asarray(values))),
    )
    return path
