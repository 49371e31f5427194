"""Global branch-and-bound driver on the weight box.

The driver maintains a simplicial subdivision of Q.  Every simplex carries
the affine overestimator xi of the optimal-value function built from vertex
evaluations, and a lower bound from its penalized subproblem.  Upper bounds
come from feasible points: every vertex evaluation yields (v, Psi(v)), and
each iteration additionally evaluates the minimizing subproblem's weights.

One outer iteration performs, in order:

  1. solve all not-yet-bounded active subproblems (optionally in worker
     threads; results are merged in ascending simplex id, and no
     value-function cache access happens off the coordinator, so runs are
     bitwise reproducible for any thread count),
  2. evaluate the value function at the current minimizer's weights,
     update the incumbent, and test exact feasibility f = phi there,
  3. record (lower bound, upper bound) history and check termination
     (gap closed, exact feasibility, element budget),
  4. dismiss active simplices whose bound exceeds the incumbent value
     (with a tiny guard against float ties),
  5. refine the best ceil(15%) and worst ceil(5%) of the remaining active
     simplices (by bound, ties by id; the minimizer is always included),
     evaluating the value function at the new vertices.

Lower bounds never decrease (children relaxations are tighter than their
parent's) and the incumbent value never increases (it is a running minimum
over a growing set); both are audited every iteration, as is the volume
identity sum(leaves) = vol(Q).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray

from .config import SolverParams
from .errors import SolverError, SubproblemError
from .geometry import (
    ACTIVE,
    DISMISSED,
    INCUMBENT,
    REFINED,
    Simplex,
    build_xi,
    initial_triangulation,
    refine,
)
from .lower_level import LowerLevelSolver, cache_key
from .penalty_newton import KKTIterate, SubproblemResult, find_gamma
from .problem import Problem, eval_F, eval_f

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]

Termination = Literal["gap_reached", "element_limit", "exact_feasible"]
Decision = Literal["continue", "gap_reached", "element_limit", "exact_feasible"]


@dataclass(frozen=True)
class IterationRow:
    """One line of the bounds history."""

    iteration: int
    subproblems: int
    lower_bound: float
    upper_bound: float

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


@dataclass(frozen=True)
class SubproblemRecord:
    """Telemetry for one solved penalty subproblem."""

    uid: int
    depth: int
    gamma: float
    penalized_value: float
    slack: float
    newton_iterations: int
    gamma_evals: int


@dataclass
class GlobalResult:
    beta_opt: Vector
    objective_value: float  # incumbent upper bound
    lower_bound: float
    gap: float
    termination: Termination
    iterations: int
    subproblems: int
    history: list[IterationRow]
    records: list[SubproblemRecord]
    state: "SolverState"


def check_termination(
    gap: float,
    subproblems: int,
    exact_feasible: bool,
    params: SolverParams,
) -> Decision:
    """Stopping decision for the outer loop."""
    if gap <= params.gap_tol:
        return "gap_reached"
    if exact_feasible:
        return "exact_feasible"
    if subproblems >= params.element_limit:
        return "element_limit"
    return "continue"


def select_for_refinement(active: list[Simplex], params: SolverParams) -> list[Simplex]:
    """ceil(best-fraction) lowest bounds plus ceil(worst-fraction) highest.

    Sorting is by (bound, id), so ties resolve to smaller ids and the
    argmin simplex is always selected.  The two groups may overlap on tiny
    populations; duplicates are dropped.
    """
    if not active:
        return []
    order = sorted(active, key=lambda s: (s.lower_bound, s.uid))
    k_best = math.ceil(params.refine_best * len(order))
    k_worst = math.ceil(params.refine_worst * len(order)) if params.refine_worst > 0 else 0
    chosen: list[Simplex] = order[:k_best]
    seen = {s.uid for s in chosen}
    for s in order[len(order) - k_worst :]:
        if s.uid not in seen:
            chosen.append(s)
            seen.add(s.uid)
    return chosen


@dataclass
class SolverState:
    """Mutable branch-and-bound state over the subdivision of Q."""

    problem: Problem
    lower: LowerLevelSolver
    params: SolverParams
    simplices: dict[int, Simplex] = field(default_factory=dict)
    next_uid: int = 0
    iteration: int = 0
    subproblems: int = 0
    upper_bound: float = math.inf
    incumbent_beta: Vector | None = None
    incumbent_key: tuple[str, ...] | None = None
    incumbent_uid: int | None = None
    history: list[IterationRow] = field(default_factory=list)
    records: list[SubproblemRecord] = field(default_factory=list)
    _ub_seen: set[tuple[str, ...]] = field(default_factory=set)
    _box_volume: float = 0.0

    # -- helpers --------------------------------------------------------

    def active(self) -> list[Simplex]:
        return [s for s in self.simplices.values() if s.is_active]

    def leaves(self) -> list[Simplex]:
        return [s for s in self.simplices.values() if s.status != REFINED]

    def lower_bound(self) -> float:
        act = self.active()
        return min(s.lower_bound for s in act) if act else math.inf

    def _observe_point(self, beta: Vector, key: tuple[str, ...], value: float) -> None:
        if value < self.upper_bound:
            self.upper_bound = value
            self.incumbent_beta = beta.copy()
            self.incumbent_key = key

    def eval_vertex(self, beta: Vector):
        """Value function at beta; feeds the incumbent the feasible point."""
        phi, sol = self.lower.value_function(beta)
        key = cache_key(beta)
        if key not in self._ub_seen and sol.has_vectors:
            self._ub_seen.add(key)
            self._observe_point(np.asarray(beta, dtype=float), key,
                                eval_F(self.problem, beta, sol.y, sol.u))
        return phi, sol

    def attach_xi(self, simplex: Simplex) -> None:
        phis = np.array([self.eval_vertex(v)[0] for v in simplex.vertices])
        simplex.phi_vertices = phis
        simplex.xi_grad, simplex.xi_offset = build_xi(simplex.vertices, phis)

    def audit(self) -> None:
        """Invariants that must hold at every iteration."""
        vol = sum(s.volume for s in self.leaves())
        if abs(vol - self._box_volume) > 1e-9 * self._box_volume:
            raise SolverError(
                f"subdivision volume drifted: leaves sum to {vol!r}, box is "
                f"{self._box_volume!r}"
            )
        if len(self.history) >= 2:
            # the bound-noise budget is the penalty search's value shortfall
            # (gamma_tol, relative); audit with a factor ten of headroom
            prev, cur = self.history[-2], self.history[-1]
            slack = 10.0 * self.params.gamma_tol
            if cur.lower_bound < prev.lower_bound - slack * max(1.0, abs(prev.lower_bound)):
                raise SolverError(
                    f"lower bound decreased: {prev.lower_bound!r} -> {cur.lower_bound!r}"
                )
            if cur.upper_bound > prev.upper_bound + 1e-12 * max(1.0, abs(prev.upper_bound)):
                raise SolverError(
                    f"upper bound increased: {prev.upper_bound!r} -> {cur.upper_bound!r}"
                )


def _warm_start(state: SolverState, simplex: Simplex) -> KKTIterate | None:
    if simplex.parent is None:
        return None
    parent = state.simplices.get(simplex.parent)
    if parent is None or parent.solved is None:
        return None
    it: KKTIterate = parent.solved.iterate
    return KKTIterate(
        beta=it.beta.copy(),
        y=it.y.copy(),
        u=it.u.copy(),
        z=np.zeros(simplex.K.shape[0]),
        p=it.p.copy(),
    )


def _solve_one(state: SolverState, simplex: Simplex) -> SubproblemResult:
    try:
        return find_gamma(state.problem, simplex, state.params, _warm_start(state, simplex))
    except SubproblemError:
        logger.warning("subproblem %d failed warm; retrying cold", simplex.uid)
        simplex.gamma_inherited = 0.0
        return find_gamma(state.problem, simplex, state.params, None)


def run(
    problem: Problem,
    lower: LowerLevelSolver,
    params: SolverParams | None = None,
    threads: int = 1,
    snapshot_every: int = 0,
    snapshot_writer: Callable[[SolverState], None] | None = None,
) -> GlobalResult:
    """Solve the bilevel problem to the requested gap over the weight box."""
    params = params or SolverParams()
    state = SolverState(problem=problem, lower=lower, params=params)
    roots = initial_triangulation(problem.box_lower, problem.box_upper)
    state._box_volume = float(np.prod(problem.box_upper - problem.box_lower))
    for simplex in roots:
        state.attach_xi(simplex)
        state.simplices[simplex.uid] = simplex
    state.next_uid = len(roots)
    n_children = 2**problem.n

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while True:
            state.iteration += 1
            batch = sorted(
                (s for s in state.active() if s.solved is None), key=lambda s: s.uid
            )
            if pool is not None:
                results = list(pool.map(lambda s: _solve_one(state, s), batch))
            else:
                results = [_solve_one(state, s) for s in batch]
            for simplex, result in zip(batch, results):
                simplex.solved = result
                simplex.lower_bound = result.penalized_value
                simplex.gamma_inherited = result.gamma
                state.records.append(
                    SubproblemRecord(
                        uid=simplex.uid,
                        depth=simplex.depth,
                        gamma=result.gamma,
                        penalized_value=result.penalized_value,
                        slack=result.slack,
                        newton_iterations=result.total_iterations,
                        gamma_evals=result.gamma_evals,
                    )
                )
            state.subproblems += len(batch)

            # incumbent candidate at the current minimizer's weights
            act = state.active()
            t_min = min(act, key=lambda s: (s.lower_bound, s.uid))
            beta_k = t_min.solved.iterate.beta
            exact = False
            if np.all(beta_k > 0.0):
                phi_k, _ = state.eval_vertex(beta_k)
                f_k = eval_f(problem, beta_k, t_min.solved.iterate.y, t_min.solved.iterate.u)
                exact = abs(f_k - phi_k) <= params.feasibility_tol * (1.0 + abs(phi_k))
            if state.incumbent_uid is not None:
                old = state.simplices[state.incumbent_uid]
                if old.status == INCUMBENT:
                    old.status = ACTIVE
            t_min.status = INCUMBENT
            state.incumbent_uid = t_min.uid

            lb = state.lower_bound()
            state.history.append(
                IterationRow(
                    iteration=state.iteration,
                    subproblems=state.subproblems,
                    lower_bound=lb,
                    upper_bound=state.upper_bound,
                )
            )
            state.audit()
            gap = state.upper_bound - lb
            logger.info(
                "iter %d: subproblems=%d active=%d lb=%.6e ub=%.6e gap=%.3e",
                state.iteration, state.subproblems, len(act), lb, state.upper_bound, gap,
            )
            if snapshot_every > 0 and snapshot_writer is not None:
                if state.iteration % snapshot_every == 0:
                    snapshot_writer(state)

            decision = check_termination(gap, state.subproblems, exact, params)
            if decision != "continue":
                if snapshot_writer is not None and (
                    snapshot_every == 0 or state.iteration % snapshot_every != 0
                ):
                    snapshot_writer(state)
                return GlobalResult(
                    beta_opt=state.incumbent_beta,
                    objective_value=state.upper_bound,
                    lower_bound=lb,
                    gap=gap,
                    termination=decision,
                    iterations=state.iteration,
                    subproblems=state.subproblems,
                    history=state.history,
                    records=state.records,
                    state=state,
                )

            # dismiss simplices that provably hold no better point
            for simplex in state.active():
                if simplex.lower_bound > state.upper_bound + params.prune_guard:
                    simplex.status = DISMISSED

            for parent in select_for_refinement(state.active(), params):
                children = refine(parent, state.next_uid, created_iter=state.iteration)
                state.next_uid += n_children
                parent.status = REFINED
                for child in children:
                    state.attach_xi(child)
                    state.simplices[child.uid] = child
    finally:
        if pool is not None:
            pool.shutdown()
