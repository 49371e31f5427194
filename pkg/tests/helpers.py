"""Shared builders and independent oracles for the test suite.

Every oracle here is written against the mathematical definition only:
dense linear algebra, exhaustive enumeration, barycentric coordinates.
None of them call back into the solver paths they are meant to check.
"""

from __future__ import annotations

import numpy as np

from bilevelbnb.config import Setup, build_setup, parse_config

BENCH = {
    "objective": "F1",
    "grid_cells": 8,
    "box_lower": [0.1, 0.1],
    "box_upper": [1.0, 1.0],
    "desired_states": ["sin_sin", "bi_quartic"],
    "sigma_l": 0.03,
    "sigma_u": 0.05,
    "sigma_beta": 1e-5,
    "control_lower": 0.0,
    "control_upper": 3.0,
    "beta_m": [0.6, 0.3],
}


def make_setup(**overrides) -> Setup:
    """Benchmark data with overrides; F3 swaps the anchor for named targets."""
    data = {**BENCH, **overrides}
    if data["objective"] == "F3" and "target_state" not in data:
        data.pop("beta_m", None)
        data["target_state"] = "parabola_sin"
        data["target_control"] = "zero"
    return build_setup(parse_config(data))


def dense_laplacian(m: int) -> np.ndarray:
    """Five-point stencil on the (m-1)^2 interior nodes, assembled densely
    from the stencil definition (independent of the sparse builder)."""
    side = m - 1
    h = 2.0 / m
    n = side * side
    A = np.zeros((n, n))
    for k in range(n):
        i, j = k % side, k // side
        A[k, k] = 4.0 / h**2
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            if 0 <= ii < side and 0 <= jj < side:
                A[k, jj * side + ii] = -1.0 / h**2
    return A


def enumerate_lower_level(problem, beta: np.ndarray) -> np.ndarray:
    """Globally optimal control by exhaustive active-set enumeration.

    For every assignment of each control node to {lower bound, free,
    upper bound} the KKT system becomes linear in (y, p); a pattern is
    valid when the eliminated control satisfies the projection formula
    with the right signs.  Strict convexity makes the valid control
    unique, so all surviving patterns must agree.
    """
    N = problem.grid.n_nodes
    A = problem.ops.A.toarray()
    c = float(np.sum(1.0 / beta))
    d = np.einsum("i,ij->j", 1.0 / beta, problem.desired)
    ua, ub = problem.u_lower, problem.u_upper
    sl = problem.sigma_l

    patterns = np.array(
        np.meshgrid(*([[0, 1, 2]] * N), indexing="ij")
    ).reshape(N, -1).T  # (3^N, N); 0: at lower, 1: free, 2: at upper
    P = patterns.shape[0]

    # unknowns x = (y, p): rows 1..N: c y + A^T p = d
    #                      rows N+1..2N: (A y)_k - [free_k] p_k / sl = rhs_k
    M = np.zeros((P, 2 * N, 2 * N))
    M[:, :N, :N] = c * np.eye(N)
    M[:, :N, N:] = A.T
    M[:, N:, :N] = A
    free = patterns == 1
    idx = np.arange(N)
    M[:, N + idx, N + idx] = np.where(free, -1.0 / sl, 0.0)
    rhs = np.zeros((P, 2 * N))
    rhs[:, :N] = d
    rhs[:, N:] = np.where(patterns == 0, ua, 0.0) + np.where(patterns == 2, ub, 0.0)

    x = np.linalg.solve(M, rhs[..., None])[..., 0]
    p = x[:, N:]
    ratio = p / sl
    ok = np.ones(P, dtype=bool)
    ok &= np.all(np.where(patterns == 0, ratio <= ua + 1e-11, True), axis=1)
    ok &= np.all(np.where(patterns == 2, ratio >= ub - 1e-11, True), axis=1)
    ok &= np.all(
        np.where(free, (ratio >= ua - 1e-11) & (ratio <= ub + 1e-11), True), axis=1
    )
    assert np.any(ok), "no valid active-set pattern; enumeration oracle is broken"
    controls = np.where(
        patterns == 0, ua, np.where(patterns == 2, ub, np.clip(ratio, ua, ub))
    )[ok]
    spread = np.max(np.abs(controls - controls[0]))
    assert spread <= 1e-8, f"valid patterns disagree by {spread:.2e}"
    return controls[0]


def barycentric(vertices: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of a point wrt an (n+1, n) vertex array."""
    m, n = vertices.shape
    system = np.vstack([vertices.T, np.ones(m)])
    rhs = np.concatenate([point, [1.0]])
    return np.linalg.solve(system, rhs)


def sample_in_simplex(vertices: np.ndarray, rng: np.random.Generator, k: int):
    """k points uniformly distributed in the simplex (Dirichlet weights)."""
    w = rng.dirichlet(np.ones(vertices.shape[0]), size=k)
    return w @ vertices
