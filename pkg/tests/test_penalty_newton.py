"""Penalized subproblems: Newton convergence, penalty search, lower-bound
soundness."""

import dataclasses

import numpy as np
import pytest

from bilevelbnb.config import SolverParams
from bilevelbnb.errors import SubproblemError
from bilevelbnb.geometry import build_xi, initial_triangulation, refine
from bilevelbnb.lower_level import LowerLevelSolver
from bilevelbnb.penalty_newton import (
    _branches,
    _pack,
    _unpack,
    cold_start,
    find_gamma,
    newton_step,
    residual_W,
    solve_subproblem,
)
from bilevelbnb.problem import eval_F

from helpers import make_setup, sample_in_simplex


@pytest.fixture(scope="module")
def bench():
    setup = make_setup(grid_cells=8)
    return setup.problem, LowerLevelSolver(setup.problem)


def with_xi(simplex, lower):
    phis = np.array([lower.value_function(v)[0] for v in simplex.vertices])
    simplex.phi_vertices = phis
    simplex.xi_grad, simplex.xi_offset = build_xi(simplex.vertices, phis)
    return simplex


@pytest.fixture(scope="module")
def home(bench):
    """Initial triangle containing the anchor weights."""
    problem, lower = bench
    tris = initial_triangulation(problem.box_lower, problem.box_upper)
    return with_xi(next(t for t in tris if t.contains(problem.beta_m)), lower)


@pytest.fixture(scope="module")
def deep(bench):
    """Depth-4 descendant near (0.95, 0.95), far from the anchor."""
    problem, lower = bench
    target = np.array([0.95, 0.95])
    simplex = next(
        t for t in initial_triangulation(problem.box_lower, problem.box_upper)
        if t.contains(target)
    )
    uid = 10
    for _ in range(4):
        children = refine(simplex, uid)
        uid += len(children)
        simplex = next(c for c in children if c.contains(target))
    return with_xi(simplex, lower)


def test_gamma_zero_recovers_anchor(bench, home):
    """Without penalty the subproblem has the anchor as exact minimizer."""
    problem, _ = bench
    result = solve_subproblem(problem, home, 0.0)
    assert np.max(np.abs(result.iterate.beta - problem.beta_m)) <= 1e-12
    assert np.max(np.abs(result.iterate.y - problem.y_target)) <= 1e-12
    assert np.max(np.abs(result.iterate.u - problem.u_target)) <= 1e-12
    assert abs(result.penalized_value) <= 1e-20
    assert result.slack < 0.0
    assert result.iterations <= 2


def test_residual_small_at_solution(bench, home):
    problem, _ = bench
    result = solve_subproblem(problem, home, 0.0)
    W, value = residual_W(problem, home, 0.0, result.iterate)
    assert np.max(np.abs(W)) <= 1e-9 * (1.0 + abs(value))
    assert result.residual_norm == pytest.approx(np.max(np.abs(W)), abs=1e-15)


def test_residual_history_monotone(bench, deep):
    problem, _ = bench
    result = solve_subproblem(problem, deep, 4.0)
    hist = result.residual_history
    assert len(hist) == result.iterations + 1
    assert all(b < a for a, b in zip(hist, hist[1:]))
    assert hist[-1] == result.residual_norm


def test_missing_interpolant_rejected(bench):
    problem, _ = bench
    bare = initial_triangulation(problem.box_lower, problem.box_upper)[0]
    with pytest.raises(ValueError, match="interpolant"):
        solve_subproblem(problem, bare, 0.0)


def test_iteration_budget_raises(bench, deep):
    problem, _ = bench
    params = dataclasses.replace(SolverParams(), newton_max_iter=0)
    with pytest.raises(SubproblemError):
        solve_subproblem(problem, deep, 4.0, params=params)


def test_one_newton_step_is_quadratic(bench, deep):
    """Contraction r_new = O(r_old^2) near a solution with fixed branches."""
    problem, _ = bench
    result = find_gamma(problem, deep)
    gamma = result.gamma
    rng = np.random.default_rng(7)
    n, N = problem.n, problem.grid.n_nodes
    for eps in (1e-3, 1e-4, 1e-5):
        x = _pack(result.iterate.copy())
        direction = rng.standard_normal(x.size)
        x += eps * direction / np.max(np.abs(direction))
        it = _unpack(x.copy(), n, N)
        before = _branches(problem, deep, gamma, it)
        r1 = np.max(np.abs(residual_W(problem, deep, gamma, it)[0]))
        step = newton_step(problem, deep, gamma, it)
        stepped = _unpack(x + step, n, N)
        after = _branches(problem, deep, gamma, stepped)
        assert np.array_equal(before[0], after[0])
        assert np.array_equal(before[1], after[1])
        r2 = np.max(np.abs(residual_W(problem, deep, gamma, stepped)[0]))
        assert r2 <= 1e-2 * r1**2 + 1e-14


def test_find_gamma_inactive_returns_zero(bench, home):
    """Anchor feasibility keeps the penalty off on its home triangle."""
    problem, _ = bench
    result = find_gamma(problem, home)
    assert result.gamma == 0.0
    assert result.slack < 0.0
    assert abs(result.penalized_value) <= 1e-20


def test_find_gamma_positive_with_small_slack(bench, deep):
    problem, _ = bench
    base = solve_subproblem(problem, deep, 0.0)
    assert base.slack > 0.0
    result = find_gamma(problem, deep)
    assert result.gamma > 0.0
    assert abs(result.slack) <= 1e-6 * max(1.0, abs(result.xi_value))
    assert result.gamma_evals >= 2
    assert result.penalized_value > base.penalized_value


def test_slack_decreases_value_concave_in_gamma(bench, deep):
    problem, _ = bench
    gammas = [0.0, 2.0, 4.0, 8.0, 16.0]
    results = []
    warm = None
    for gamma in gammas:
        r = solve_subproblem(problem, deep, gamma, start=warm)
        warm = r.iterate
        results.append(r)
    slacks = [r.slack for r in results]
    assert all(b <= a + 1e-9 for a, b in zip(slacks, slacks[1:]))
    values = [r.penalized_value for r in results]
    diffs = [(v2 - v1) / (g2 - g1)
             for v1, v2, g1, g2 in zip(values, values[1:], gammas, gammas[1:])]
    assert all(d2 <= d1 + 1e-9 for d1, d2 in zip(diffs, diffs[1:]))


def test_value_derivative_is_slack(bench, deep):
    """Difference quotients of the value sit inside the slack envelope."""
    problem, _ = bench
    result = find_gamma(problem, deep)
    gamma = result.gamma
    for delta in (0.05 * gamma, 0.01 * gamma):
        ahead = solve_subproblem(problem, deep, gamma + delta, start=result.iterate.copy())
        quotient = (ahead.penalized_value - result.penalized_value) / delta
        assert ahead.slack - 1e-9 <= quotient <= result.slack + 1e-9


def test_find_gamma_near_maximal(bench, deep):
    """No other penalty weight beats the returned bound by more than tol."""
    problem, _ = bench
    result = find_gamma(problem, deep)
    for factor in (0.25, 0.5, 0.9, 1.1, 2.0, 4.0):
        other = solve_subproblem(
            problem, deep, factor * result.gamma, start=result.iterate.copy()
        )
        assert other.penalized_value <= result.penalized_value + 1e-6


def test_penalized_value_is_lower_bound(bench, deep):
    """Weak duality: every bilevel-feasible point in the cell beats the bound."""
    problem, lower = bench
    result = find_gamma(problem, deep)
    rng = np.random.default_rng(31)
    for beta in sample_in_simplex(deep.vertices, rng, 25):
        sol = lower.solve(beta)
        upper = eval_F(problem, beta, sol.y, sol.u)
        assert upper >= result.penalized_value - 1e-9


def test_gamma_eval_budget_raises(bench, deep):
    problem, _ = bench
    params = dataclasses.replace(SolverParams(), gamma_max_evals=1)
    with pytest.raises(SubproblemError, match="exceeded"):
        find_gamma(problem, deep, params=params)


def test_warm_start_converges_in_few_steps(bench, deep):
    problem, _ = bench
    result = find_gamma(problem, deep)
    cold = solve_subproblem(problem, deep, result.gamma)
    warm = solve_subproblem(problem, deep, result.gamma, start=result.iterate.copy())
    assert warm.iterations <= 2
    assert warm.iterations <= cold.iterations
    assert warm.penalized_value == pytest.approx(cold.penalized_value, rel=1e-9, abs=1e-12)


def test_cold_start_is_feasible_iterate(bench, home):
    problem, _ = bench
    it = cold_start(problem, home, 1.0)
    assert home.contains(it.beta)
    assert np.all(it.u >= problem.u_lower - 1e-12)
    assert np.all(it.u <= problem.u_upper + 1e-12)
    state_gap = problem.ops.A @ it.y - it.u
    assert np.max(np.abs(state_gap)) <= 1e-10
    assert np.all(it.z == 0.0)
