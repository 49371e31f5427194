"""Global bilevel solver for inverse optimal control of elliptic PDEs.

The upper level recovers tracking weights of a lower-level control
problem; the lower level is replaced by its optimal value, relaxed by
vertex interpolation on simplices, and bounded from below by penalty
subproblems solved with a semismooth Newton method.
"""

from .config import RunConfig, SolverParams, load_config
from .discretization import Grid, Operators
from .errors import ConfigError, SolverError, SubproblemError
from .geometry import Simplex, initial_triangulation, refine
from .global_solver import GlobalResult, SolverState, run
from .lower_level import LowerLevelSolver
from .oracle import LatticeResult, scan
from .penalty_newton import SubproblemResult, find_gamma, solve_subproblem
from .problem import Problem, eval_F

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GlobalResult",
    "Grid",
    "LatticeResult",
    "LowerLevelSolver",
    "Operators",
    "Problem",
    "RunConfig",
    "Simplex",
    "SolverError",
    "SolverParams",
    "SolverState",
    "SubproblemError",
    "SubproblemResult",
    "__version__",
    "eval_F",
    "find_gamma",
    "initial_triangulation",
    "load_config",
    "refine",
    "run",
    "scan",
    "solve_subproblem",
]
