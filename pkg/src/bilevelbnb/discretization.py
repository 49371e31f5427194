"""Finite-difference discretization of the state equation on (-1, 1)^2.

The Poisson problem -Δy = u with homogeneous Dirichlet boundary values is
discretized with the classical five-point stencil on a uniform grid with m
cells per side, so h = 2/m and the N = (m-1)^2 interior nodes carry all
unknowns.  Boundary values are eliminated; A is the sparse stiffness matrix,
the control enters through B = Id, and S = A^{-1} B is applied through a
cached sparse LU factorization.

All function-space quantities use the discrete L2 inner product
<x, y>_h = h^2 * sum_k x_k y_k.  Objectives are defined directly on this
discrete level, which makes every adjoint a plain matrix transpose (and A is
symmetric, so state and adjoint solves share one factorization).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid of (-1, 1)^2 with m cells per side."""

    m: int
    h: float
    n_nodes: int
    xs: NDArray[np.float64]  # x-coordinate per node, x varies fastest
    ys: NDArray[np.float64]

    def node_indices(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Integer grid indices (i, j) in 1..m-1 for every node."""
        side = self.m - 1
        k = np.arange(self.n_nodes)
        return k % side + 1, k // side + 1


def build_grid(m: int) -> Grid:
    """Interior nodes (-1 + i*h, -1 + j*h), i, j = 1..m-1, h = 2/m."""
    if m < 2:
        raise ValueError(f"need at least 2 cells per side, got m={m}")
    h = 2.0 / m
    side = m - 1
    ticks = -1.0 + h * np.arange(1, m)
    xs = np.tile(ticks, side)
    ys = np.repeat(ticks, side)
    return Grid(m=m, h=h, n_nodes=side * side, xs=xs, ys=ys)


@dataclass(eq=False)
class Operators:
    """Stiffness matrix A, control injection B = Id, and solver for S.

    Compares by identity (eq=False) so downstream solvers can key caches
    of derived factorizations on the operator bundle itself.
    """

    grid: Grid
    A: sp.csr_matrix
    _lu: spla.SuperLU = field(repr=False)

    def solve_state(self, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
        """Solve A y = rhs via the cached factorization (A is symmetric,
        so the same call serves the adjoint equation)."""
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def control_to_state(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        """S u = A^{-1} B u with B = Id."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.grid.n_nodes,):
            raise ValueError(f"control has shape {u.shape}, expected ({self.grid.n_nodes},)")
        if not np.all(np.isfinite(u)):
            raise ValueError("control contains non-finite entries")
        return self._lu.solve(u)


def build_operators(grid: Grid) -> Operators:
    """Assemble the five-point Laplacian and factorize it once.

    Diagonal 4/h^2, each interior neighbour contributes -1/h^2; rows of
    nodes adjacent to the boundary simply lose those entries.
    """
    side = grid.m - 1
    scale = 1.0 / grid.h**2
    tri = sp.diags([-scale, 2.0 * scale, -scale], [-1, 0, 1], shape=(side, side))
    eye = sp.identity(side)
    A = (sp.kron(eye, tri) + sp.kron(tri, eye)).tocsr()
    lu = spla.splu(A.tocsc())
    return Operators(grid=grid, A=A, _lu=lu)


def inner(grid: Grid, x: NDArray[np.float64], y: NDArray[np.float64]) -> float:
    """Discrete L2 inner product h^2 * sum_k x_k y_k."""
    return grid.h**2 * float(np.dot(x, y))


def norm(grid: Grid, x: NDArray[np.float64]) -> float:
    """Norm induced by :func:`inner`."""
    return float(np.sqrt(inner(grid, x, x)))
