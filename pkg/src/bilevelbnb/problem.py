"""Problem data and objective evaluators for the bilevel weight-identification
problem.

The lower level tracks n desired states with unknown positive weights.  In
the original parameterization the weights alpha multiply the tracking terms;
substituting beta_i = 1/alpha_i makes the lower-level objective

    f(beta, y, u) = sum_i 1/(2 beta_i) ||y - y_d_i||_h^2 + sigma_l/2 ||u||_h^2

jointly convex in (beta, y, u) for beta > 0 (each tracking term is a
perspective of a convex quadratic), which the global bounding scheme relies
on.  The box Q for beta is the transformed weight box.

Three upper-level objectives are supported:

    F1: 1/2 ||y - y_m||_h^2 + sigma_u/2 ||u - u_m||_h^2 + sigma_b/2 |beta - beta_m|^2
    F2: 1/2 ||y - y_m||_h^2 + sigma_u/2 ||u - u_m||_h^2 + sigma_b/2 |beta|^2
    F3: 1/2 ||y - y_t||_h^2 + sigma_u/2 ||u - u_t||_h^2 + sigma_b/2 sum_i beta_i^-2

State/control terms use the discrete L2 norm, the beta terms the Euclidean
norm on R^n.  eval_h collects the (beta, y)-part of the penalized objective
F + gamma*(f - xi) together with first and second derivatives; the u-part
sigma_u/2 ||u - u_t||_h^2 + gamma*sigma_l/2 ||u||_h^2 is handled where the
control update is formed and never enters h.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .discretization import Grid, Operators, inner

Objective = Literal["F1", "F2", "F3"]

Vector = NDArray[np.float64]


@dataclass(frozen=True)
class Problem:
    """Immutable bundle of grid, operators, and objective data."""

    grid: Grid
    ops: Operators
    n: int
    desired: Vector  # shape (n, N), desired states y_d_i at interior nodes
    box_lower: Vector  # beta box Q, componentwise > 0
    box_upper: Vector
    sigma_l: float
    sigma_u: float
    sigma_beta: float
    objective: Objective
    u_lower: Vector
    u_upper: Vector
    beta_m: Vector | None = None  # anchor weights (required for F1)
    y_target: Vector | None = None  # y_m (F1/F2) or the named target state (F3)
    u_target: Vector | None = None

    def with_targets(self, y_target: Vector, u_target: Vector) -> "Problem":
        return replace(self, y_target=y_target, u_target=u_target)

    def check_beta(self, beta: Vector) -> Vector:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.n,):
            raise ValueError(f"beta has shape {beta.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0.0):
            raise ValueError(f"beta must be positive and finite, got {beta}")
        return beta


def alpha_to_beta(alpha: Vector) -> Vector:
    """Componentwise inversion mapping original weights to transformed ones.

    Maps [a, b] boxes to [1/b, 1/a] boxes and is its own inverse on the
    positive orthant.
    """
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
        raise ValueError(f"weights must be positive and finite, got {alpha}")
    return 1.0 / alpha


def _tracking_sq(grid: Grid, y: Vector, desired: Vector) -> Vector:
    """||y - y_d_i||_h^2 for every desired state, as a length-n vector."""
    diff = y[None, :] - desired
    return grid.h**2 * np.einsum("ij,ij->i", diff, diff)


def eval_f(
    problem: Problem, beta: Vector, y: Vector, u: Vector, want_grads: bool = False
):
    """Lower-level objective; optionally with gradients (g_beta, g_y, g_u).

    g_y and g_u are discrete-L2 Riesz representatives (pointwise values),
    g_beta is the plain Euclidean gradient in R^n.
    """
    beta = problem.check_beta(beta)
    grid = problem.grid
    track = _tracking_sq(grid, y, problem.desired)
    value = float(np.dot(0.5 / beta, track)) + 0.5 * problem.sigma_l * inner(grid, u, u)
    if not want_grads:
        return value
    g_beta = -0.5 * track / beta**2
    g_y = np.einsum("i,ij->j", 1.0 / beta, y[None, :] - problem.desired)
    g_u = problem.sigma_l * u
    return value, g_beta, g_y, g_u


def _beta_term(problem: Problem, beta: Vector) -> tuple[float, Vector, Vector]:
    """Value, gradient, and Hessian diagonal of the beta part of F."""
    sb = problem.sigma_beta
    if problem.objective == "F1":
        if problem.beta_m is None:
            raise ValueError("objective F1 needs anchor weights beta_m")
        d = beta - problem.beta_m
        return 0.5 * sb * float(np.dot(d, d)), sb * d, np.full_like(beta, sb)
    if problem.objective == "F2":
        return 0.5 * sb * float(np.dot(beta, beta)), sb * beta, np.full_like(beta, sb)
    # F3 penalizes the inverse squares, keeping weights away from zero
    return (
        0.5 * sb * float(np.sum(beta**-2)),
        -sb * beta**-3,
        3.0 * sb * beta**-4,
    )


def eval_F(
    problem: Problem, beta: Vector, y: Vector, u: Vector, want_grads: bool = False
):
    """Upper-level objective; optionally with gradients (g_beta, g_y, g_u)."""
    beta = problem.check_beta(beta)
    if problem.y_target is None or problem.u_target is None:
        raise ValueError("targets are not set on this problem")
    grid = problem.grid
    dy = y - problem.y_target
    du = u - problem.u_target
    b_val, b_grad, _ = _beta_term(problem, beta)
    value = 0.5 * inner(grid, dy, dy) + 0.5 * problem.sigma_u * inner(grid, du, du) + b_val
    if not want_grads:
        return value
    return value, b_grad, dy, problem.sigma_u * du


@dataclass(frozen=True)
class HBlocks:
    """(beta, y)-part of the penalized objective and its derivative blocks.

    hess_yy is the scalar c such that the yy block equals c * Id.  The
    mixed blocks differ by the quadrature weight: hess_beta_y carries h^2
    (it differentiates the Euclidean beta-gradient by y), hess_y_beta does
    not (it differentiates the pointwise y-gradient by beta), hence
    hess_beta_y = h^2 * hess_y_beta.T.
    """

    value: float
    grad_beta: Vector  # (n,)
    grad_y: Vector  # (N,)
    hess_beta: Vector | None  # diagonal of the beta-beta block, (n,)
    hess_beta_y: NDArray[np.float64] | None  # (n, N)
    hess_y_beta: NDArray[np.float64] | None  # (N, n)
    hess_yy: float


def eval_h(
    problem: Problem,
    beta: Vector,
    y: Vector,
    gamma: float,
    xi_grad: Vector,
    xi_offset: float,
    want_hess: bool = True,
) -> HBlocks:
    """Evaluate h(beta, y) = F-part + gamma * (f-part - xi(beta)).

    xi is the affine relaxation xi(beta) = xi_grad . beta + xi_offset.
    gamma = 0 with xi = 0 recovers the plain upper-level (beta, y)-part.
    """
    beta = problem.check_beta(beta)
    if gamma < 0.0:
        raise ValueError(f"penalty parameter must be nonnegative, got {gamma}")
    if problem.y_target is None:
        raise ValueError("targets are not set on this problem")
    grid = problem.grid
    h2 = grid.h**2
    diff = y[None, :] - problem.desired  # (n, N)
    track = h2 * np.einsum("ij,ij->i", diff, diff)

    b_val, b_grad, b_hess = _beta_term(problem, beta)
    dy = y - problem.y_target
    xi_val = float(np.dot(xi_grad, beta)) + xi_offset

    value = (
        0.5 * inner(grid, dy, dy)
        + b_val
        + gamma * (float(np.dot(0.5 / beta, track)) - xi_val)
    )
    grad_beta = b_grad + gamma * (-0.5 * track / beta**2 - xi_grad)
    grad_y = dy + gamma * np.einsum("i,ij->j", 1.0 / beta, diff)
    hess_yy = 1.0 + gamma * float(np.sum(1.0 / beta))
    if not want_hess:
        return HBlocks(
            value=value,
            grad_beta=grad_beta,
            grad_y=grad_y,
            hess_beta=None,
            hess_beta_y=None,
            hess_y_beta=None,
            hess_yy=hess_yy,
        )
    hess_beta = b_hess + gamma * track / beta**3
    hess_y_beta = gamma * (-diff.T / beta**2)
    hess_beta_y = h2 * hess_y_beta.T
    return HBlocks(
        value=value,
        grad_beta=grad_beta,
        grad_y=grad_y,
        hess_beta=hess_beta,
        hess_beta_y=hess_beta_y,
        hess_y_beta=hess_y_beta,
        hess_yy=hess_yy,
    )


def control_part(problem: Problem, u: Vector, gamma: float) -> float:
    """u-dependent remainder of the penalized objective."""
    if problem.u_target is None:
        raise ValueError("targets are not set on this problem")
    grid = problem.grid
    du = u - problem.u_target
    return 0.5 * problem.sigma_u * inner(grid, du, du) + 0.5 * gamma * problem.sigma_l * inner(
        grid, u, u
    )


def penalized_value(
    problem: Problem,
    beta: Vector,
    y: Vector,
    u: Vector,
    gamma: float,
    xi_grad: Vector,
    xi_offset: float,
) -> float:
    """F + gamma * (f - xi) evaluated directly (used for cross-checks)."""
    xi_val = float(np.dot(xi_grad, beta)) + xi_offset
    return eval_F(problem, beta, y, u) + gamma * (eval_f(problem, beta, y, u) - xi_val)
