"""Brute-force lattice scan of the reduced objective F(beta, Psi(beta)).

Independent of the branch-and-bound machinery: for every point of a
regular lattice on the weight box Q, solve the lower level and evaluate
the upper objective at its response.  The scan gives ground truth for
certificate checks on small instances (every lattice value is attainable,
so the true minimum over Q can exceed the lattice minimum only by the
objective's modulus of continuity over one cell).

The scan runs on its own lower-level solver instance so that its cache
retains full solution vectors for every lattice point without evicting
entries the caller may rely on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .lower_level import LowerLevelSolver
from .problem import Problem, eval_F

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]


@dataclass(frozen=True)
class LatticeResult:
    """Dense scan of the reduced objective over a box lattice."""

    points: Matrix  # (K**n, n) lattice points, row-major over axes
    values: Vector  # reduced objective at each point
    argmin_index: int  # first index attaining the minimum (id tie-break)
    points_per_axis: int

    @property
    def argmin_beta(self) -> Vector:
        return self.points[self.argmin_index]

    @property
    def min_value(self) -> float:
        return float(self.values[self.argmin_index])

    def cell_widths(self, box_lower: Vector, box_upper: Vector) -> Vector:
        """Per-axis lattice spacing (the resolution of the argmin)."""
        k = self.points_per_axis
        return (np.asarray(box_upper) - np.asarray(box_lower)) / max(k - 1, 1)


def lattice_points(box_lower: Vector, box_upper: Vector, k: int) -> Matrix:
    """Regular k-per-axis lattice on the box, endpoints included.

    Rows are emitted in row-major order over the axes (the first axis
    varies slowest), so indices are reproducible across runs.
    """
    if k < 1:
        raise ConfigError(f"lattice needs at least 1 point per axis, got {k}")
    axes = [np.linspace(lo, hi, k) for lo, hi in zip(box_lower, box_upper)]
    rows = [np.array(p) for p in itertools.product(*axes)]
    return np.stack(rows)


def scan(problem: Problem, k: int, budget: int = 200_000) -> LatticeResult:
    """Evaluate F(beta, Psi(beta)) on a k-per-axis lattice over Q.

    Raises ConfigError when the scan would exceed the solve budget; the
    guard keeps accidental hundred-thousand-solve invocations out of
    interactive use.
    """
    if k > 400:
        raise ConfigError(f"lattice capped at 400 points per axis, got {k}")
    total = k**problem.n
    if total > budget:
        raise ConfigError(
            f"lattice of {k}^{problem.n} = {total} lower-level solves "
            f"exceeds the budget of {budget}"
        )
    points = lattice_points(problem.box_lower, problem.box_upper, k)
    solver = LowerLevelSolver(problem, vector_limit=total + 1)
    values = np.empty(len(points))
    best = 0
    for i, beta in enumerate(points):
        sol = solver.solve(beta)
        values[i] = eval_F(problem, beta, sol.y, sol.u)
        if values[i] < values[best]:
            best = i  # strict: ties keep the smaller index
    return LatticeResult(
        points=points, values=values, argmin_index=best, points_per_axis=k
    )
