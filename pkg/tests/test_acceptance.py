"""Acceptance suite: end-to-end checks at fixed tolerances.

Each check prints one PASS/FAIL line (A1..A8) on the live terminal so the
gate is readable straight off the pytest log.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from bilevelbnb.cli import main
from bilevelbnb.geometry import aspect_ratio, build_xi, initial_triangulation, refine
from bilevelbnb.global_solver import run
from bilevelbnb.lower_level import LowerLevelSolver
from bilevelbnb.oracle import scan
from bilevelbnb.penalty_newton import solve_subproblem

from helpers import enumerate_lower_level, make_setup, sample_in_simplex

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _report(capsys, criterion: str, ok: bool, details: str) -> None:
    # capture is file-descriptor level, so only disabling it gets the
    # verdict line onto the terminal for passing tests too
    with capsys.disabled():
        print(f"\n{criterion}: {'PASS' if ok else 'FAIL'}  {details}", flush=True)
    assert ok, f"{criterion} failed: {details}"


def test_a1_parameter_recovery(tmp_path, capsys):
    """m=32 benchmark run recovers the anchor weights with a tiny bound."""
    t0 = time.perf_counter()
    out = tmp_path / "a1"
    code = main([
        "solve",
        "--config", str(CONFIGS / "f1.json"),
        "--out", str(out),
        "--snapshot-every", "1",
    ])
    elapsed = time.perf_counter() - t0
    solution = json.loads((out / "solution.json").read_text())
    beta_err = max(abs(b - t) for b, t in zip(solution["beta_opt"], (0.6, 0.3)))
    ok = (
        code == 0
        and beta_err <= 1e-3
        and solution["objective_value"] <= 1e-8
        and solution["subproblems"] <= 5000
        and elapsed <= 300.0
    )
    _report(
        capsys, "A1", ok,
        f"beta_err={beta_err:.2e} (<=1e-3) ub={solution['objective_value']:.2e} "
        f"(<=1e-8) subproblems={solution['subproblems']} (<=5000) "
        f"time={elapsed:.1f}s",
    )


def test_a2_certificate_against_brute_force(capsys):
    """Bounds bracket a 200x200 lattice scan at every iteration (m=4)."""
    t0 = time.perf_counter()
    ticks = np.linspace(0.1, 1.0, 200)
    setup = make_setup(grid_cells=4, beta_m=[ticks[110], ticks[44]])
    lattice = scan(setup.problem, 200)
    result = run(setup.problem, setup.lower, setup.config.solver)
    elapsed = time.perf_counter() - t0

    bracket_ok = all(
        row.lower_bound - 1e-9 <= lattice.min_value <= row.upper_bound + 1e-9
        for row in result.history
    )
    widths = lattice.cell_widths(setup.problem.box_lower, setup.problem.box_upper)
    cell_err = np.max(np.abs(result.beta_opt - lattice.argmin_beta) / widths)
    ok = bracket_ok and cell_err <= 1.0 + 1e-9 and elapsed <= 120.0
    _report(
        capsys, "A2", ok,
        f"bracket={'ok' if bracket_ok else 'VIOLATED'} over {len(result.history)} "
        f"iterations, argmin offset={cell_err:.3f} cells (<=1), time={elapsed:.1f}s "
        f"(<=120s)",
    )


def test_a3_lower_level_oracle_equivalence(capsys):
    """Newton matches 3^9 active-set enumeration at 20 random weights."""
    setup = make_setup(grid_cells=4)
    lower = LowerLevelSolver(setup.problem)
    rng = np.random.default_rng(2024)
    lo, hi = setup.problem.box_lower, setup.problem.box_upper
    worst = 0.0
    for _ in range(20):
        beta = lo + rng.random(2) * (hi - lo)
        u_star = enumerate_lower_level(setup.problem, beta)
        sol = lower.solve(beta)
        worst = max(worst, float(np.max(np.abs(sol.u - u_star))))
    ok = worst <= 1e-9
    _report(capsys, "A3", ok,
            f"max control deviation={worst:.2e} (<=1e-9) over 20 weights")


def test_a4_superlinear_newton(f3_m8_run, capsys):
    """Residual histories of real subproblems end with a superlinear drop."""
    setup, result = f3_m8_run
    records = [r for r in result.records if r.gamma > 0.0][:12]
    assert len(records) >= 10
    worst_ratio, worst_iters = 0.0, 0
    for record in records:
        simplex = result.state.simplices[record.uid]
        solved = solve_subproblem(setup.problem, simplex, record.gamma)
        history = solved.residual_history
        if len(history) >= 2:
            worst_ratio = max(worst_ratio, history[-1] / history[-2])
        worst_iters = max(worst_iters, solved.iterations)
    ok = worst_ratio <= 0.1 and worst_iters <= 25
    _report(
        capsys, "A4", ok,
        f"{len(records)} subproblems, worst final ratio={worst_ratio:.2e} (<=0.1), "
        f"worst iterations={worst_iters} (<=25)",
    )


def test_a5_refinement_invariants(capsys):
    """Volume bookkeeping, congruence, and exact cover for n in {1,2,3}."""
    rng = np.random.default_rng(55)
    failures = []
    for n in (1, 2, 3):
        parent = initial_triangulation(np.zeros(n), np.ones(n))[0]
        aspects = []
        simplex, uid = parent, 100
        for _ in range(3):
            aspects.append(aspect_ratio(simplex.vertices))
            children = refine(simplex, uid)
            uid += len(children)
            total = sum(c.volume for c in children)
            if abs(total - simplex.volume) > 1e-12 * simplex.volume:
                failures.append(f"n={n} volume sum off by {total - simplex.volume:.1e}")
            if any(
                abs(c.volume - simplex.volume / 2**n) > 1e-12 * simplex.volume
                for c in children
            ):
                failures.append(f"n={n} child volume != parent/2^n")
            simplex = children[0]
        aspects.append(aspect_ratio(simplex.vertices))
        if max(aspects) - min(aspects) > 1e-12:
            failures.append(f"n={n} aspect drifted {max(aspects) - min(aspects):.1e}")

        children = refine(parent, 500)
        samples = sample_in_simplex(parent.vertices, rng, 100_000)
        margins = np.stack(
            [(c.K @ samples.T - c.b[:, None]).max(axis=0) for c in children]
        )
        inside = (margins < -1e-12).sum(axis=0)
        on_facet = (np.abs(margins) <= 1e-12).any(axis=0)
        uncovered = int(((inside == 0) & ~on_facet).sum())
        doubled = int((inside > 1).sum())
        if uncovered or doubled:
            failures.append(f"n={n} cover: {uncovered} uncovered, {doubled} doubled")
    ok = not failures
    _report(capsys, "A5", ok, "; ".join(failures) if failures else
            "volumes, congruence, aspect, and 3x100000-sample cover all exact")


def test_a6_interpolant_gap_decay(capsys):
    """max(xi - phi) decays like diam^2 along a refinement chain."""
    setup = make_setup(grid_cells=8)
    lower = LowerLevelSolver(setup.problem)
    anchor_point = np.array([0.75, 0.35])
    simplex = next(
        t for t in initial_triangulation(setup.problem.box_lower, setup.problem.box_upper)
        if t.contains(anchor_point)
    )
    # skip the root: the value function's 1/beta growth near the box floor
    # keeps the coarsest chord out of the quadratic-decay regime
    simplex = next(c for c in refine(simplex, 10) if c.contains(anchor_point))
    rng = np.random.default_rng(17)
    gaps, min_gap, uid = [], np.inf, 50
    for _ in range(5):
        phis = np.array([lower.value_function(v)[0] for v in simplex.vertices])
        simplex.xi_grad, simplex.xi_offset = build_xi(simplex.vertices, phis)
        values = [
            simplex.xi_value(b) - lower.value_function(b)[0]
            for b in sample_in_simplex(simplex.vertices, rng, 300)
        ]
        gaps.append(max(values))
        min_gap = min(min_gap, min(values))
        children = refine(simplex, uid)
        uid += len(children)
        simplex = next(c for c in children if c.contains(anchor_point))
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    ok = all(2.0 <= r <= 8.0 for r in ratios) and min_gap >= -1e-10
    _report(
        capsys, "A6", ok,
        f"decay ratios={[f'{r:.2f}' for r in ratios]} (each in [2,8]), "
        f"min(xi-phi)={min_gap:.1e} (>=-1e-10)",
    )


def test_a7_penalty_weight_maximality(f3_m8_run, capsys):
    """The returned gamma maximizes the bound; its slack is a near-root."""
    setup, result = f3_m8_run
    records = [r for r in result.records if r.gamma > 0.0][:10]
    assert len(records) == 10
    worst_slack, worst_shortfall = 0.0, -np.inf
    for record in records:
        simplex = result.state.simplices[record.uid]
        worst_slack = max(worst_slack, abs(record.slack))
        for factor in (0.5, 2.0):
            other = solve_subproblem(
                setup.problem, simplex, factor * record.gamma,
                start=simplex.solved.iterate.copy(),
            )
            worst_shortfall = max(
                worst_shortfall, other.penalized_value - record.penalized_value
            )
    ok = worst_slack <= 1e-6 and worst_shortfall <= 1e-8
    _report(
        capsys, "A7", ok,
        f"10 subproblems x {{gamma/2, 2 gamma}}: worst shortfall="
        f"{worst_shortfall:.2e} (<=1e-8), worst |slack|={worst_slack:.2e} (<=1e-6)",
    )


def test_a8_benchmark_difficulty_ordering(capsys):
    """m=16 reruns: easy instance closes first, hard one exhausts elements."""
    t0 = time.perf_counter()
    outcomes = {}
    for name, overrides in (
        ("F1", {}),
        ("F2", {"objective": "F2"}),
        ("F3", {"objective": "F3", "solver": {"element_limit": 20000}}),
    ):
        setup = make_setup(grid_cells=16, **overrides)
        outcomes[name] = run(setup.problem, setup.lower, setup.config.solver)
    elapsed = time.perf_counter() - t0

    monotone = True
    for result in outcomes.values():
        rows = result.history
        slack = 1e-9
        monotone &= all(
            b.lower_bound >= a.lower_bound - slack * max(1.0, abs(a.lower_bound))
            and b.upper_bound <= a.upper_bound + 1e-12 * max(1.0, abs(a.upper_bound))
            for a, b in zip(rows, rows[1:])
        )
    f1, f2, f3 = outcomes["F1"], outcomes["F2"], outcomes["F3"]
    ok = (
        f1.termination == "gap_reached"
        and f2.termination == "gap_reached"
        and f1.subproblems < f2.subproblems
        and f1.subproblems < f3.subproblems
        and f3.termination == "element_limit"
        and f3.gap > 1e-4
        and monotone
    )
    _report(
        capsys, "A8", ok,
        f"subproblems F1={f1.subproblems} < F2={f2.subproblems}, F3={f3.subproblems} "
        f"({f3.termination}, gap={f3.gap:.2e}>1e-4), bounds monotone={monotone}, "
        f"time={elapsed:.0f}s",
    )
