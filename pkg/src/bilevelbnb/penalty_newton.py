"""Penalized per-simplex subproblem and its semismooth Newton solver.

On a simplex T = {K beta <= b} with affine value-function interpolant
xi(beta), the relaxed subproblem with penalty weight gamma >= 0 reads

    min  F(beta, y, u) + gamma * (f(beta, y, u) - xi(beta))
    s.t. K beta <= b,  A y = B u,  u_a <= u <= u_b.

Since xi overestimates the optimal-value function on T, the minimum is a
valid lower bound for the bilevel objective over T for every gamma >= 0;
the bound is tightest at the smallest gamma whose solution satisfies
f <= xi ("slack" f - xi <= 0).  The slack is non-increasing in gamma (the
value of the subproblem is concave in gamma with the slack as derivative),
so that gamma is found by Newton steps on the slack root, safeguarded by a
sign-change bracket with regula falsi/bisection fallbacks; the converged
gamma is precisely the multiplier of the value-function constraint in the
constrained relaxation.

First-order conditions are collapsed into the nonsmooth root problem
W(beta, y, u, z, p) = 0 with blocks

    W1 = h'_beta(beta, y) + K^T z
    W2 = h'_y(beta, y) + A^T p
    W3 = u - clip((B^T p + sigma_u u_t) / sigma_hat, u_a, u_b)
    W4 = max(K beta - b, -z)                    (componentwise)
    W5 = A y - B u

where h is the u-independent part of the penalized objective (see eval_h),
sigma_hat = sigma_u + gamma * sigma_l, and u_t the control target.  W is
semismooth; a Newton derivative is obtained by fixing the clip/max branches
at the current iterate, which yields local q-superlinear convergence.  The
globalization is a residual-monotone line search on powers of two combined
with a floor keeping beta >= box_lower / 2 (so the 1/beta terms stay
bounded along the iteration).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .config import SolverParams
from .errors import SubproblemError
from .geometry import Simplex
from .problem import HBlocks, Problem, control_part, eval_f, eval_h

Vector = NDArray[np.float64]

_DENSE_MAX_DIM = 400
_DAMPING_STEPS = 20
_TIGHT_TOL = 1e-12  # aim for this relative residual; accept newton_tol


def _dense_solver(M: NDArray[np.float64]) -> Callable[[Vector], Vector]:
    lu_piv = sla.lu_factor(M)
    return lambda rhs: sla.lu_solve(lu_piv, rhs)


class _SparsePattern:
    """Fixed sparsity pattern of the Newton matrix with in-place refills.

    The nonzero set never changes (inactive clip/max branches keep their
    slots as explicit zeros), so the CSC index structure and the constant
    blocks (A, A^T, identities) are computed once; each iteration only
    overwrites the varying block values and permutes them into CSC order.
    """

    def __init__(self, A: sp.csr_matrix, n: int) -> None:
        N = A.shape[0]
        dim = 2 * n + 1 + 3 * N
        ob, oy, ou = 0, n, n + N
        oz, op_ = n + 2 * N, 2 * n + 2 * N + 1
        at = A.T.tocoo()
        a = A.tocoo()
        rows, cols, slices = [], [], {}

        def add(name: str, r: NDArray, c: NDArray) -> None:
            slices[name] = slice(sum(len(x) for x in rows), sum(len(x) for x in rows) + len(r))
            rows.append(np.asarray(r, dtype=np.int64))
            cols.append(np.asarray(c, dtype=np.int64))

        ar_n, ar_N, ar_f = np.arange(n), np.arange(N), np.arange(n + 1)
        add("hess_beta", ob + ar_n, ob + ar_n)
        add("hess_beta_y", ob + np.repeat(ar_n, N), oy + np.tile(ar_N, n))
        add("K_T", ob + np.repeat(ar_n, n + 1), oz + np.tile(ar_f, n))
        add("hess_y_beta", oy + np.repeat(ar_N, n), ob + np.tile(ar_n, N))
        add("hess_yy", oy + ar_N, oy + ar_N)
        add("A_T", oy + at.row, op_ + at.col)
        add("eye_u", ou + ar_N, ou + ar_N)
        add("clip", ou + ar_N, op_ + ar_N)
        add("K_active", oz + np.repeat(ar_f, n), ob + np.tile(ar_n, n + 1))
        add("z_inactive", oz + ar_f, oz + ar_f)
        add("A", op_ + a.row, oy + a.col)
        add("eye_p", op_ + ar_N, ou + ar_N)

        r_all = np.concatenate(rows)
        c_all = np.concatenate(cols)
        order = np.lexsort((r_all, c_all))
        key = c_all[order] * dim + r_all[order]
        if np.any(np.diff(key) == 0):
            raise AssertionError("overlapping blocks in the Newton pattern")
        self.dim = dim
        self.slices = slices
        self.order = order
        self.indices = r_all[order].astype(np.int32)
        self.indptr = np.concatenate(
            [[0], np.cumsum(np.bincount(c_all, minlength=dim))]
        ).astype(np.int32)
        self.base = np.zeros(len(r_all))
        self.base[slices["A_T"]] = at.data
        self.base[slices["A"]] = a.data
        self.base[slices["eye_u"]] = 1.0
        self.base[slices["eye_p"]] = -1.0

    def matrix(
        self, h: HBlocks, K: NDArray, chi1: Vector, chi3: Vector, sigma_hat: float
    ) -> sp.csc_matrix:
        vals = self.base.copy()
        s = self.slices
        vals[s["hess_beta"]] = h.hess_beta
        vals[s["hess_beta_y"]] = h.hess_beta_y.ravel()
        vals[s["K_T"]] = K.T.ravel()
        vals[s["hess_y_beta"]] = h.hess_y_beta.ravel()
        vals[s["hess_yy"]] = h.hess_yy
        vals[s["clip"]] = -chi3 / sigma_hat
        vals[s["K_active"]] = (chi1[:, None] * K).ravel()
        vals[s["z_inactive"]] = -(1.0 - chi1)
        return sp.csc_matrix(
            (vals[self.order], self.indices, self.indptr), shape=(self.dim, self.dim)
        )


_patterns: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _pattern_for(problem: Problem) -> _SparsePattern:
    cached = _patterns.get(problem.ops)
    if cached is None or cached.dim != 2 * problem.n + 1 + 3 * problem.grid.n_nodes:
        cached = _SparsePattern(problem.ops.A, problem.n)
        _patterns[problem.ops] = cached
    return cached


@dataclass
class KKTIterate:
    """Primal-dual point of the penalized subproblem."""

    beta: Vector
    y: Vector
    u: Vector
    z: Vector  # multipliers of K beta <= b, length n+1
    p: Vector  # adjoint state

    def copy(self) -> "KKTIterate":
        return KKTIterate(*(v.copy() for v in (self.beta, self.y, self.u, self.z, self.p)))


@dataclass
class SubproblemResult:
    """Converged subproblem at a fixed penalty weight (or the final one of
    the penalty search)."""

    gamma: float
    iterate: KKTIterate
    penalized_value: float
    slack: float  # f - xi at the solution
    f_value: float
    xi_value: float
    iterations: int  # Newton iterations of the final solve
    total_iterations: int = 0  # across the whole penalty search
    gamma_evals: int = 1
    residual_norm: float = 0.0
    residual_history: list[float] = field(default_factory=list)
    active_facets: int = 0
    clipped_controls: int = 0
    # factorization from the final accepted Newton step, reusable for
    # nearby linear solves (not part of the value semantics)
    lu_solve: Callable[[Vector], Vector] | None = field(
        default=None, repr=False, compare=False
    )


def _pack(it: KKTIterate) -> Vector:
    return np.concatenate([it.beta, it.y, it.u, it.z, it.p])


def _unpack(x: Vector, n: int, N: int) -> KKTIterate:
    return KKTIterate(
        beta=x[:n],
        y=x[n : n + N],
        u=x[n + N : n + 2 * N],
        z=x[n + 2 * N : 2 * n + 2 * N + 1],
        p=x[2 * n + 2 * N + 1 :],
    )


def residual_W(
    problem: Problem, simplex: Simplex, gamma: float, it: KKTIterate
) -> tuple[Vector, float]:
    """Residual W at the iterate, plus the penalized objective value there."""
    pr = problem
    h = eval_h(pr, it.beta, it.y, gamma, simplex.xi_grad, simplex.xi_offset, want_hess=False)
    sigma_hat = pr.sigma_u + gamma * pr.sigma_l
    arg = (it.p + pr.sigma_u * pr.u_target) / sigma_hat
    w1 = h.grad_beta + simplex.K.T @ it.z
    w2 = h.grad_y + pr.ops.A @ it.p
    w3 = it.u - np.clip(arg, pr.u_lower, pr.u_upper)
    w4 = np.maximum(simplex.K @ it.beta - simplex.b, -it.z)
    w5 = pr.ops.A @ it.y - it.u
    value = h.value + control_part(pr, it.u, gamma)
    return np.concatenate([w1, w2, w3, w4, w5]), value


def _branches(problem: Problem, simplex: Simplex, gamma: float, it: KKTIterate):
    """Active clip/max branches at the iterate.

    chi1: facet rows treated as active (K beta - b >= -z, ties active).
    chi3: control nodes where the clip argument is inside [u_a, u_b]
    (boundary ties count as inside).
    """
    pr = problem
    sigma_hat = pr.sigma_u + gamma * pr.sigma_l
    arg = (it.p + pr.sigma_u * pr.u_target) / sigma_hat
    chi3 = ((arg >= pr.u_lower) & (arg <= pr.u_upper)).astype(float)
    chi1 = (simplex.K @ it.beta - simplex.b >= -it.z).astype(float)
    return chi1, chi3, sigma_hat


def newton_matrix(
    problem: Problem,
    simplex: Simplex,
    gamma: float,
    it: KKTIterate,
    h: HBlocks | None = None,
) -> sp.csc_matrix | Vector:
    """Newton derivative of W at the iterate (dense below a size cutoff)."""
    pr = problem
    n, N = pr.n, pr.grid.n_nodes
    if h is None or h.hess_beta is None:
        h = eval_h(pr, it.beta, it.y, gamma, simplex.xi_grad, simplex.xi_offset)
    chi1, chi3, sigma_hat = _branches(problem, simplex, gamma, it)
    K = simplex.K
    dim = 2 * n + 1 + 3 * N
    if dim <= _DENSE_MAX_DIM:
        A = pr.ops.A.toarray()
        M = np.zeros((dim, dim))
        sl_b = slice(0, n)
        sl_y = slice(n, n + N)
        sl_u = slice(n + N, n + 2 * N)
        sl_z = slice(n + 2 * N, 2 * n + 2 * N + 1)
        sl_p = slice(2 * n + 2 * N + 1, dim)
        M[sl_b, sl_b] = np.diag(h.hess_beta)
        M[sl_b, sl_y] = h.hess_beta_y
        M[sl_b, sl_z] = K.T
        M[sl_y, sl_b] = h.hess_y_beta
        M[sl_y, sl_y] = h.hess_yy * np.eye(N)
        M[sl_y, sl_p] = A
        M[sl_u, sl_u] = np.eye(N)
        M[sl_u, sl_p] = np.diag(-chi3 / sigma_hat)
        M[sl_z, sl_b] = chi1[:, None] * K
        M[sl_z, sl_z] = np.diag(-(1.0 - chi1))
        M[sl_p, sl_y] = A
        M[sl_p, sl_u] = -np.eye(N)
        return M
    return _pattern_for(pr).matrix(h, K, chi1, chi3, sigma_hat)


def newton_step(problem: Problem, simplex: Simplex, gamma: float, it: KKTIterate) -> Vector:
    """One (undamped, uncapped) Newton direction as a flat vector."""
    W, _ = residual_W(problem, simplex, gamma, it)
    M = newton_matrix(problem, simplex, gamma, it)
    if isinstance(M, np.ndarray):
        return np.linalg.solve(M, -W)
    return spla.splu(M).solve(-W)


def cold_start(problem: Problem, simplex: Simplex, gamma: float) -> KKTIterate:
    """Feasible-leaning start: centroid weights, projected control target."""
    pr = problem
    beta = simplex.centroid()
    sigma_hat = pr.sigma_u + gamma * pr.sigma_l
    u = np.clip(pr.sigma_u * pr.u_target / sigma_hat, pr.u_lower, pr.u_upper)
    y = pr.ops.control_to_state(u)
    h = eval_h(pr, beta, y, gamma, simplex.xi_grad, simplex.xi_offset)
    p = pr.ops.solve_state(-h.grad_y)
    z = np.zeros(simplex.K.shape[0])
    return KKTIterate(beta=beta, y=y, u=u, z=z, p=p)


def solve_subproblem(
    problem: Problem,
    simplex: Simplex,
    gamma: float,
    start: KKTIterate | None = None,
    params: SolverParams | None = None,
) -> SubproblemResult:
    """Damped semismooth Newton on W = 0 at fixed penalty weight gamma.

    Raises SubproblemError if the residual cannot be driven below the
    relative tolerance within the iteration budget.
    """
    params = params or SolverParams()
    pr = problem
    if simplex.xi_grad is None:
        raise ValueError(f"simplex {simplex.uid} has no interpolant; build xi first")
    n, N = pr.n, pr.grid.n_nodes
    it = (start or cold_start(problem, simplex, gamma)).copy()
    floor = 0.5 * pr.box_lower

    x = _pack(it)
    it = _unpack(x, n, N)  # views into x
    W, value = residual_W(pr, simplex, gamma, it)
    res = float(np.max(np.abs(W)))
    history = [res]
    iters = 0
    lu_solve = None

    def scale(v: float) -> float:
        return 1.0 + abs(v)

    while res > _TIGHT_TOL * scale(value):
        if iters >= params.newton_max_iter:
            if res <= params.newton_tol * scale(value):
                break
            raise SubproblemError(
                f"subproblem on simplex {simplex.uid} (gamma={gamma:.6g}) stalled at "
                f"residual {res:.3e} after {iters} iterations"
            )
        M = newton_matrix(pr, simplex, gamma, it)
        try:
            if isinstance(M, np.ndarray):
                lu_solve = _dense_solver(M)
            else:
                lu_solve = spla.splu(M).solve
            step = lu_solve(-W)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SubproblemError(
                f"singular Newton system on simplex {simplex.uid} (gamma={gamma:.6g})"
            ) from exc
        if not np.all(np.isfinite(step)):
            raise SubproblemError(
                f"non-finite Newton step on simplex {simplex.uid} (gamma={gamma:.6g})"
            )
        accepted = False
        for j in range(_DAMPING_STEPS + 1):
            t = 2.0**-j
            # cap the weight move at half the box floor so 1/beta stays
            # bounded: candidates below it are rejected, not projected
            if np.any(it.beta + t * step[:n] < floor):
                continue
            x_new = x + t * step
            it_new = _unpack(x_new, n, N)
            W_new, value_new = residual_W(pr, simplex, gamma, it_new)
            res_new = float(np.max(np.abs(W_new)))
            if res_new <= (1.0 - 2.0 ** (-j - 2)) * res or res_new <= _TIGHT_TOL * scale(value_new):
                x, it, W, value, res = x_new, it_new, W_new, value_new, res_new
                accepted = True
                break
        if not accepted:
            if res <= params.newton_tol * scale(value):
                break
            raise SubproblemError(
                f"no admissible damped step on simplex {simplex.uid} "
                f"(gamma={gamma:.6g}, residual {res:.3e})"
            )
        iters += 1
        history.append(res)

    f_val = eval_f(pr, it.beta, it.y, it.u)
    xi_val = simplex.xi_value(it.beta)
    chi1, chi3, _ = _branches(pr, simplex, gamma, it)
    return SubproblemResult(
        gamma=gamma,
        iterate=it,
        penalized_value=value,
        slack=f_val - xi_val,
        f_value=f_val,
        xi_value=xi_val,
        iterations=iters,
        total_iterations=iters,
        residual_norm=res,
        residual_history=history,
        active_facets=int(np.sum(chi1)),
        clipped_controls=int(N - np.sum(chi3)),
        lu_solve=lu_solve,
    )


def slack_derivative(
    problem: Problem,
    simplex: Simplex,
    gamma: float,
    it: KKTIterate,
    lu_solve: Callable[[Vector], Vector] | None = None,
) -> float:
    """d(slack)/d(gamma) along the solution path of W = 0.

    Differentiating W(x(gamma); gamma) = 0 gives M x' = -dW/dgamma with the
    Newton matrix M; the explicit gamma-dependence sits in the penalty
    gradients (W1, W2) and in the control update denominator (W3).  The
    slack f - xi is then chained through x'.  Nonpositive in exact
    arithmetic (the subproblem value is concave in gamma).

    A factorization of the Newton matrix from the final solver step may be
    passed as lu_solve; it differs from the matrix at the converged iterate
    by one small step, which perturbs the derivative far less than the
    root-finding that consumes it can notice.
    """
    pr = problem
    n, N = pr.n, pr.grid.n_nodes
    _, g_beta, g_y, g_u = eval_f(pr, it.beta, it.y, it.u, want_grads=True)
    chi1, chi3, sigma_hat = _branches(pr, simplex, gamma, it)
    arg = (it.p + pr.sigma_u * pr.u_target) / sigma_hat
    dW = np.concatenate(
        [
            g_beta - simplex.xi_grad,
            g_y,
            chi3 * arg * pr.sigma_l / sigma_hat,
            np.zeros(n + 1),
            np.zeros(N),
        ]
    )
    if lu_solve is None:
        M = newton_matrix(pr, simplex, gamma, it)
        lu_solve = _dense_solver(M) if isinstance(M, np.ndarray) else spla.splu(M).solve
    dx = lu_solve(-dW)
    h2 = pr.grid.h**2
    d = _unpack(dx, n, N)
    return float(
        np.dot(g_beta - simplex.xi_grad, d.beta)
        + h2 * np.dot(g_y, d.y)
        + h2 * np.dot(g_u, d.u)
    )


def _solve_with_continuation(
    problem: Problem,
    simplex: Simplex,
    gamma: float,
    start: KKTIterate | None,
    params: SolverParams,
) -> tuple[SubproblemResult, int]:
    """solve_subproblem with cold-restart and halved-penalty fallbacks.

    A warm start whose active set disagrees with the solution (for example
    an iterate pinned to a simplex corner) can trap the damped iteration at
    a kink, so failures first retry from the cold start before walking up
    from a halved penalty.
    """
    try:
        return solve_subproblem(problem, simplex, gamma, start, params), 1
    except SubproblemError:
        solves = 1
    if start is not None:
        try:
            return solve_subproblem(problem, simplex, gamma, None, params), solves + 1
        except SubproblemError:
            solves += 1
    if gamma <= 0.0:
        raise SubproblemError(
            f"subproblem at gamma=0 on simplex {simplex.uid} failed from "
            f"warm and cold starts"
        )
    half, half_solves = _solve_with_continuation(
        problem, simplex, 0.5 * gamma, start, params
    )
    return (
        solve_subproblem(problem, simplex, gamma, half.iterate, params),
        solves + half_solves + 1,
    )


def find_gamma(
    problem: Problem,
    simplex: Simplex,
    params: SolverParams | None = None,
    start: KKTIterate | None = None,
) -> SubproblemResult:
    """Penalty search: smallest-slack gamma giving the tightest lower bound.

    Starts from the simplex's inherited weight and iterates Newton steps on
    the slack-versus-gamma root (the slack derivative costs one extra solve
    with the KKT matrix), maintaining a sign-change bracket as safeguard
    with regula falsi/bisection fallbacks.  The stop test bounds the value
    shortfall: by concavity of the subproblem value in gamma, the returned
    value is within |slack| * bracket_width of the maximum.  Outcomes:
    gamma = 0 with slack <= 0 (constraint inactive), or gamma > 0 with a
    certified near-maximal bound.  Every solve is warm-started from the
    nearest evaluated weight.
    """
    params = params or SolverParams()
    evals = 0
    total_iters = 0

    def solve_at(g: float, warm: KKTIterate | None) -> SubproblemResult:
        nonlocal evals, total_iters
        if evals >= params.gamma_max_evals:
            raise SubproblemError(
                f"penalty search on simplex {simplex.uid} exceeded "
                f"{params.gamma_max_evals} evaluations"
            )
        result, n_solves = _solve_with_continuation(problem, simplex, g, warm, params)
        evals += n_solves
        total_iters += result.total_iterations
        return result

    def tol_for(r: SubproblemResult) -> float:
        return params.gamma_tol * max(1.0, abs(r.xi_value))

    def finish(r: SubproblemResult) -> SubproblemResult:
        r.gamma_evals = evals
        r.total_iterations = total_iters
        r.lu_solve = None  # results outlive the search; do not pin memory
        return r

    def converged(r: SubproblemResult, width: float) -> bool:
        # value shortfall <= |slack| * distance-to-root by concavity; also
        # keep the residual slack itself small once a penalty is active
        # (absolute band; the relative floor only matters on huge scales
        # where f - xi cannot cancel below it)
        if r.gamma > 0.0 and abs(r.slack) > max(1e-6, 1e-12 * abs(r.xi_value)):
            return False
        # nonpositive slack puts the root in [0, gamma]; positive slack
        # leaves it unbounded above, so only a bracket can certify
        dist = min(width, r.gamma) if r.slack <= 0.0 else width
        return abs(r.slack) * dist <= tol_for(r)

    g0 = max(0.0, simplex.gamma_inherited)
    r0 = solve_at(g0, start)
    if g0 == 0.0 and r0.slack <= 0.0:
        return finish(r0)  # constraint inactive without penalty

    lo: float | None = None
    hi: float | None = None
    r_lo: SubproblemResult | None = None
    r_hi: SubproblemResult | None = None

    def note(r: SubproblemResult) -> None:
        nonlocal lo, hi, r_lo, r_hi
        if r.slack > 0.0:
            if lo is None or r.gamma > lo:
                lo, r_lo = r.gamma, r
        elif hi is None or r.gamma < hi:
            hi, r_hi = r.gamma, r

    note(r0)
    cur = r0
    if g0 > 0.0 and r0.slack <= 0.0:
        # negative slack at the inherited weight; the constraint may be
        # inactive outright (no penalty needed at all)
        cur = solve_at(0.0, r0.iterate)
        if cur.slack <= 0.0:
            return finish(cur)
        note(cur)

    # regula falsi side values with Illinois damping on repeated sides
    s_lo_d = r_lo.slack if r_lo is not None else np.nan
    s_hi_d = r_hi.slack if r_hi is not None else np.nan
    last_side = 0
    while True:
        width = (hi - lo) if (lo is not None and hi is not None) else np.inf
        if converged(cur, width):
            return finish(cur)
        # a bracket endpoint may satisfy the certificate even when the most
        # recent evaluation does not (the width shrinks as the search runs)
        for r_end in (r_lo, r_hi):
            if r_end is not None and r_end is not cur and converged(r_end, width):
                return finish(r_end)
        if hi is not None and lo is not None and hi - lo <= 1e-13 * max(1.0, hi):
            # vanishing bracket: accept the feasible side (slack <= 0 keeps
            # the penalized value a valid bound)
            return finish(r_hi)

        # Newton step on the slack root, anchored at the evaluated endpoint
        # with the smallest |slack| (the one nearest the root; far into the
        # negative-slack tail the curve saturates and the derivative is
        # uninformative, but the smallest-|slack| endpoint avoids that
        # region whenever any endpoint is close).  One extra linear solve
        # with the KKT matrix.  Rejected or out-of-bracket proposals fall
        # through to regula falsi/bisection below
        g: float | None = None
        anchor = min(
            (r for r in (r_lo, r_hi) if r is not None),
            key=lambda r: abs(r.slack),
            default=None,
        )
        if anchor is not None:
            ds = slack_derivative(
                problem, simplex, anchor.gamma, anchor.iterate, anchor.lu_solve
            )
            if ds < 0.0:
                g = anchor.gamma - anchor.slack / ds
        if hi is not None:
            # bracketed: keep proposals strictly interior, fall back to
            # Illinois-damped regula falsi, then bisection.  Steps taken
            # from the positive-slack side land systematically short (the
            # curve bends towards the axis), so pad those mildly
            if g is not None and anchor is r_lo:
                g = lo + 1.2 * (g - lo)
            if g is None or not (lo < g < hi):
                denom = s_hi_d - s_lo_d
                g = (lo * s_hi_d - hi * s_lo_d) / denom if denom < 0.0 else None
                if g is None or not (lo < g < hi):
                    g = 0.5 * (lo + hi)
        else:
            # every weight seen so far leaves the slack positive: expand
            # right, overshooting the Newton target to cross the root
            if g is None:
                g = params.gamma_growth * lo if lo > 0.0 else 1.0
            else:
                g = lo + 1.5 * (g - lo)
            if lo > 0.0:
                # cap the jump, but never below gamma_growth in absolute
                # terms: a tiny inherited weight must not force a long
                # geometric ladder when the root is orders of magnitude up
                cap = max(params.gamma_growth * lo, params.gamma_growth)
                g = min(max(g, 1.05 * lo), cap)
            if g > params.gamma_max:
                raise SubproblemError(
                    f"slack still positive at gamma={lo:.3e} on "
                    f"simplex {simplex.uid}; penalty cap {params.gamma_max:.1e} reached"
                )
        # warm start from the evaluated weight nearest in log scale: the
        # weight axis spans decades, and linear distance would favor tiny
        # weights whose iterates (often pinned to simplex facets) carry the
        # wrong active set
        candidates = [r for r in (r_lo, r_hi) if r is not None]
        warm = min(
            candidates,
            key=lambda r: abs(np.log(max(r.gamma, 1e-12)) - np.log(max(g, 1e-12))),
        )
        cur = solve_at(g, warm.iterate)
        if cur.slack > 0.0:
            s_lo_d = cur.slack
            if last_side > 0:
                s_hi_d *= 0.5
            last_side = 1
        else:
            s_hi_d = cur.slack
            if last_side < 0:
                s_lo_d *= 0.5
            last_side = -1
        note(cur)
