"""Run configuration: JSON schema, named grid functions, problem assembly.

Configs are flat JSON objects; unknown keys are rejected so that typos fail
loudly instead of silently running with defaults.  Grid functions (desired
states, targets, control bounds) are referenced by name from a small
registry; "constant:<v>" yields a constant function.

If no target state/control pair is named, the tracking targets are computed
by solving the lower-level problem at the anchor weights beta_m on the same
grid, which makes those weights exactly recoverable (the F1 reference setup).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .discretization import Grid, build_grid, build_operators
from .errors import ConfigError
from .lower_level import LowerLevelSolver
from .problem import Objective, Problem

Vector = NDArray[np.float64]


def _sin_sin(x: Vector, y: Vector) -> Vector:
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _bi_quartic(x: Vector, y: Vector) -> Vector:
    return (x + 1.0) * (x - 1.0) * (y + 1.0) * (y - 1.0)


def _parabola_sin(x: Vector, y: Vector) -> Vector:
    return (x - 1.0) * (x + 1.0) * np.sin(np.pi * y)


GRID_FUNCTIONS: dict[str, Callable[[Vector, Vector], Vector]] = {
    "sin_sin": _sin_sin,
    "bi_quartic": _bi_quartic,
    "parabola_sin": _parabola_sin,
    "zero": lambda x, y: np.zeros_like(x),
}


def grid_function(name: str, grid: Grid) -> Vector:
    """Evaluate a registered grid function at the interior nodes."""
    if not isinstance(name, str):
        raise ConfigError(f"grid function name must be a string, got {name!r}")
    if name.startswith("constant:"):
        try:
            value = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad constant grid function {name!r}") from exc
        if not math.isfinite(value):
            raise ConfigError(f"bad constant grid function {name!r}")
        return np.full(grid.n_nodes, value)
    try:
        fn = GRID_FUNCTIONS[name]
    except KeyError:
        known = ", ".join(sorted(GRID_FUNCTIONS) + ["constant:<v>"])
        raise ConfigError(f"unknown grid function {name!r} (known: {known})") from None
    return np.asarray(fn(grid.xs, grid.ys), dtype=float)


@dataclass(frozen=True)
class SolverParams:
    """Algorithmic knobs with performance-neutral defaults."""

    gap_tol: float = 1e-9
    element_limit: int = 300_000
    refine_best: float = 0.15
    refine_worst: float = 0.05
    newton_tol: float = 1e-9  # relative residual accepted for subproblems
    newton_max_iter: int = 100
    lower_newton_tol: float = 1e-10  # absolute residual for lower-level solves
    lower_newton_max_iter: int = 50
    gamma_tol: float = 1e-10  # relative value shortfall allowed by the penalty search
    gamma_growth: float = 10.0
    gamma_max: float = 1e12
    gamma_max_evals: int = 60
    prune_guard: float = 1e-12
    feasibility_tol: float = 1e-10  # exact-feasibility early exit
    oracle_budget: int = 200_000  # cap on lattice evaluations for the oracle

    def validate(self) -> None:
        if self.gap_tol <= 0.0:
            raise ConfigError(f"gap_tol must be positive, got {self.gap_tol}")
        if self.element_limit < 1:
            raise ConfigError(f"element_limit must be >= 1, got {self.element_limit}")
        if not (0.0 < self.refine_best <= 1.0 and 0.0 <= self.refine_worst <= 1.0):
            raise ConfigError("refinement fractions must lie in (0, 1] and [0, 1]")
        for name in ("newton_tol", "lower_newton_tol", "gamma_tol", "gamma_max"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.gamma_growth <= 1.0:
            raise ConfigError(f"gamma_growth must exceed 1, got {self.gamma_growth}")


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration prior to operator assembly."""

    objective: Objective
    grid_cells: int
    box_lower: Vector
    box_upper: Vector
    desired_states: tuple[str, ...]
    sigma_l: float
    sigma_u: float
    sigma_beta: float
    control_lower: float | str
    control_upper: float | str
    beta_m: Vector | None
    target_state: str | None
    target_control: str | None
    solver: SolverParams
    raw: dict = field(repr=False, default_factory=dict)


_TOP_KEYS = {
    "objective",
    "grid_cells",
    "box_lower",
    "box_upper",
    "desired_states",
    "sigma_l",
    "sigma_u",
    "sigma_beta",
    "control_lower",
    "control_upper",
    "beta_m",
    "target_state",
    "target_control",
    "solver",
}


def _as_positive_vector(data: object, key: str) -> Vector:
    if not isinstance(data, (list, tuple)) or not data:
        raise ConfigError(f"{key} must be a non-empty array of numbers")
    try:
        vec = np.asarray([float(v) for v in data], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must contain only numbers") from exc
    if not np.all(np.isfinite(vec)):
        raise ConfigError(f"{key} must be finite")
    return vec


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed JSON object; raises ConfigError on any problem."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {
        "objective",
        "grid_cells",
        "box_lower",
        "box_upper",
        "desired_states",
        "sigma_l",
        "sigma_u",
        "sigma_beta",
        "control_lower",
        "control_upper",
    } - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")

    objective = data["objective"]
    if objective not in ("F1", "F2", "F3"):
        raise ConfigError(f"objective must be one of F1, F2, F3, got {objective!r}")

    grid_cells = data["grid_cells"]
    if not isinstance(grid_cells, int) or grid_cells < 2:
        raise ConfigError(f"grid_cells must be an integer >= 2, got {grid_cells!r}")

    box_lower = _as_positive_vector(data["box_lower"], "box_lower")
    box_upper = _as_positive_vector(data["box_upper"], "box_upper")
    if box_lower.shape != box_upper.shape:
        raise ConfigError("box_lower and box_upper must have equal length")
    if np.any(box_lower <= 0.0):
        raise ConfigError("box_lower must be componentwise positive")
    if np.any(box_lower > box_upper):
        raise ConfigError("weight box is empty (box_lower > box_upper)")

    desired = data["desired_states"]
    if not isinstance(desired, list) or len(desired) != box_lower.size:
        raise ConfigError(
            f"desired_states must list exactly {box_lower.size} grid function names"
        )

    sigmas = {}
    for key in ("sigma_l", "sigma_u", "sigma_beta"):
        try:
            sigmas[key] = float(data[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be a number") from exc
    if sigmas["sigma_l"] <= 0.0 or sigmas["sigma_u"] <= 0.0:
        raise ConfigError("sigma_l and sigma_u must be positive")
    if sigmas["sigma_beta"] < 0.0:
        raise ConfigError("sigma_beta must be nonnegative")

    bounds = {}
    for key in ("control_lower", "control_upper"):
        val = data[key]
        if isinstance(val, bool) or not isinstance(val, (int, float, str)):
            raise ConfigError(f"{key} must be a number or grid function name")
        bounds[key] = float(val) if isinstance(val, (int, float)) else val

    beta_m = None
    if "beta_m" in data:
        beta_m = _as_positive_vector(data["beta_m"], "beta_m")
        if beta_m.shape != box_lower.shape:
            raise ConfigError("beta_m must match the weight box dimension")
        if np.any(beta_m < box_lower) or np.any(beta_m > box_upper):
            raise ConfigError("beta_m must lie inside the weight box")

    target_state = data.get("target_state")
    target_control = data.get("target_control")
    if (target_state is None) != (target_control is None):
        raise ConfigError("target_state and target_control must be given together")
    if target_state is None and beta_m is None:
        raise ConfigError("either beta_m or a named target pair is required")
    if objective == "F1" and beta_m is None:
        raise ConfigError("objective F1 needs beta_m")

    solver_data = data.get("solver", {})
    if not isinstance(solver_data, dict):
        raise ConfigError("solver must be an object")
    known = {f.name for f in fields(SolverParams)}
    unknown = set(solver_data) - known
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    try:
        solver = SolverParams(**solver_data)
    except TypeError as exc:
        raise ConfigError(f"bad solver section: {exc}") from exc
    solver.validate()

    return RunConfig(
        objective=objective,
        grid_cells=grid_cells,
        box_lower=box_lower,
        box_upper=box_upper,
        desired_states=tuple(desired),
        sigma_l=sigmas["sigma_l"],
        sigma_u=sigmas["sigma_u"],
        sigma_beta=sigmas["sigma_beta"],
        control_lower=bounds["control_lower"],
        control_upper=bounds["control_upper"],
        beta_m=beta_m,
        target_state=target_state,
        target_control=target_control,
        solver=solver,
        raw=data,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


@dataclass
class Setup:
    """Assembled problem plus the lower-level solver bound to it."""

    config: RunConfig
    problem: Problem
    lower: LowerLevelSolver


def build_setup(config: RunConfig) -> Setup:
    """Assemble grid, operators, data vectors, and tracking targets."""
    grid = build_grid(config.grid_cells)
    ops = build_operators(grid)
    desired = np.stack([grid_function(name, grid) for name in config.desired_states])

    def bound_vec(spec: float | str) -> Vector:
        if isinstance(spec, str):
            return grid_function(spec, grid)
        return np.full(grid.n_nodes, float(spec))

    u_lower = bound_vec(config.control_lower)
    u_upper = bound_vec(config.control_upper)
    if np.any(u_lower > u_upper):
        raise ConfigError("empty admissible control set (control_lower > control_upper)")

    problem = Problem(
        grid=grid,
        ops=ops,
        n=desired.shape[0],
        desired=desired,
        box_lower=config.box_lower,
        box_upper=config.box_upper,
        sigma_l=config.sigma_l,
        sigma_u=config.sigma_u,
        sigma_beta=config.sigma_beta,
        objective=config.objective,
        u_lower=u_lower,
        u_upper=u_upper,
        beta_m=config.beta_m,
    )
    lower = LowerLevelSolver(
        problem,
        tol=config.solver.lower_newton_tol,
        max_iter=config.solver.lower_newton_max_iter,
    )
    if config.target_state is not None:
        y_t = grid_function(config.target_state, grid)
        u_t = grid_function(config.target_control, grid)
    else:
        # reconstructible reference targets: the lower-level response at beta_m
        sol = lower.solve(config.beta_m)
        y_t, u_t = sol.y, sol.u
    problem = problem.with_targets(y_t, u_t)
    lower.problem = problem
    return Setup(config=config, problem=problem, lower=lower)
