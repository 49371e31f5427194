"""Lower-level tracking problem and the optimal-value function.

For fixed weights beta > 0 the lower level

    min_{y,u}  sum_i 1/(2 beta_i) ||y - y_d_i||_h^2 + sigma_l/2 ||u||_h^2
    s.t.       A y = B u,  u_a <= u <= u_b

is strongly convex in u, so its solution (y, u) and the optimal value
phi(beta) are unique.  The first-order system in (y, u, p),

    sum_i (y - y_d_i)/beta_i + A^T p = 0
    u - clip(B^T p / sigma_l, u_a, u_b) = 0
    A y - B u = 0,

is the fixed-weights specialization of the penalized KKT residual (only the
state, control, and constraint rows survive; the control row uses the bare
sigma_l and no target shift).  It is solved by a damped semismooth Newton
method; the clip row makes this a primal-dual active-set iteration.

phi is convex (each tracking term is a perspective function jointly convex
in (beta_i, y)), differentiable, and

    d phi / d beta_i = -||y(beta) - y_d_i||_h^2 / (2 beta_i^2).

Solutions are cached by beta rounded to 12 significant digits; repeated
queries return the cached record without Newton work.  Vector payloads of
old entries can be evicted to bound memory; scalar data (value, tracking
norms, counts) always survives, so bounds and gradients stay available.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .errors import SolverError
from .problem import Problem

Vector = NDArray[np.float64]

_DENSE_MAX_NODES = 160  # below this, assemble the Newton system densely
_DAMPING_STEPS = 20


def cache_key(beta: Vector) -> tuple[str, ...]:
    """beta rounded to 12 significant digits, as a hashable key."""
    return tuple(f"{b:.11e}" for b in beta)


@dataclass
class LowerLevelSolution:
    """Converged lower-level point; vectors may be evicted, scalars never."""

    beta: Vector
    phi: float
    track: Vector  # ||y - y_d_i||_h^2 per desired state
    iterations: int
    active_lower: int  # nodes clipped at the lower control bound
    active_upper: int
    y: Vector | None
    u: Vector | None
    p: Vector | None

    @property
    def has_vectors(self) -> bool:
        return self.y is not None

    def multiplier(self, sigma_l: float) -> Vector:
        """Bound multiplier nu = B^T p - sigma_l u (normal-cone element)."""
        if not self.has_vectors:
            raise ValueError("vector payload of this solution was evicted")
        return self.p - sigma_l * self.u


class LowerLevelSolver:
    """Semismooth Newton solver for the lower level with a solution cache."""

    def __init__(self, problem: Problem, tol: float = 1e-10, max_iter: int = 50,
                 vector_limit: int = 25_000):
        self.problem = problem
        self.tol = tol
        self.max_iter = max_iter
        self.vector_limit = vector_limit
        self._cache: dict[tuple[str, ...], LowerLevelSolution] = {}
        self._with_vectors: deque[tuple[str, ...]] = deque()
        # warm-start candidates as one growing matrix so the nearest-point
        # query stays a single vectorized reduction (evicted rows go inf)
        self._beta_rows: Vector | None = None
        self._row_keys: list[tuple[str, ...]] = []
        self._row_of: dict[tuple[str, ...], int] = {}
        self.total_solves = 0
        self.total_newton_iters = 0
        self.cache_hits = 0
        self._dense_A: Vector | None = None

    # -- residual and Newton matrix ------------------------------------

    def _residual(self, beta: Vector, y: Vector, u: Vector, p: Vector) -> tuple[Vector, Vector]:
        pr = self.problem
        stationarity = np.einsum("i,ij->j", 1.0 / beta, y[None, :] - pr.desired) + pr.ops.A @ p
        proj = np.clip(p / pr.sigma_l, pr.u_lower, pr.u_upper)
        return np.concatenate([stationarity, u - proj, pr.ops.A @ y - u]), proj

    def _newton_matrix_dense(self, beta: Vector, chi: Vector) -> Vector:
        pr = self.problem
        N = pr.grid.n_nodes
        if self._dense_A is None:
            self._dense_A = pr.ops.A.toarray()
        A = self._dense_A
        M = np.zeros((3 * N, 3 * N))
        np.fill_diagonal(M[:N, :N], float(np.sum(1.0 / beta)))
        M[:N, 2 * N:] = A
        np.fill_diagonal(M[N:2 * N, N:2 * N], 1.0)
        M[N:2 * N, 2 * N:] = np.diag(-chi / pr.sigma_l)
        M[2 * N:, :N] = A
        np.fill_diagonal(M[2 * N:, N:2 * N], -1.0)
        return M

    def _newton_matrix_sparse(self, beta: Vector, chi: Vector) -> sp.csc_matrix:
        pr = self.problem
        N = pr.grid.n_nodes
        eye = sp.identity(N, format="csr")
        c = float(np.sum(1.0 / beta))
        return sp.bmat(
            [
                [c * eye, None, pr.ops.A],
                [None, eye, sp.diags(-chi / pr.sigma_l)],
                [pr.ops.A, -eye, None],
            ],
            format="csc",
        )

    # -- solving --------------------------------------------------------

    def _initial_point(self, beta: Vector, warm: LowerLevelSolution | None):
        pr = self.problem
        if warm is not None and warm.has_vectors:
            return warm.y.copy(), warm.u.copy(), warm.p.copy()
        # cold start from the bound-free problem: eliminating u = p/sigma_l
        # and p against the state equation leaves one SPD solve in y; the
        # clipped control it implies identifies the active set well even
        # under heavy tracking weights, where a zero start can stall
        A = pr.ops.A
        c = float(np.sum(1.0 / beta))
        d = np.einsum("i,ij->j", 1.0 / beta, pr.desired)
        M = c * sp.identity(pr.grid.n_nodes, format="csc") + pr.sigma_l * (A.T @ A)
        y_free = spla.splu(M.tocsc()).solve(d)
        u = np.clip(A @ y_free, pr.u_lower, pr.u_upper)
        y = pr.ops.control_to_state(u)
        rhs = -np.einsum("i,ij->j", 1.0 / beta, y[None, :] - pr.desired)
        p = pr.ops.solve_state(rhs)
        return y, u, p

    def _note_candidate(self, key: tuple[str, ...], beta: Vector) -> None:
        if self._beta_rows is None:
            self._beta_rows = np.full((256, beta.size), np.inf)
        if len(self._row_keys) == len(self._beta_rows):
            grown = np.full((2 * len(self._beta_rows), beta.size), np.inf)
            grown[: len(self._row_keys)] = self._beta_rows
            self._beta_rows = grown
        self._beta_rows[len(self._row_keys)] = beta
        self._row_of[key] = len(self._row_keys)
        self._row_keys.append(key)

    def _nearest_cached(self, beta: Vector) -> LowerLevelSolution | None:
        if not self._row_keys:
            return None
        rows = self._beta_rows[: len(self._row_keys)]
        idx = int(np.argmin(((rows - beta) ** 2).sum(axis=1)))
        if not np.isfinite(rows[idx, 0]):
            return None  # every candidate's vectors were evicted
        return self._cache[self._row_keys[idx]]

    def solve(self, beta: Vector, warm: LowerLevelSolution | None = None) -> LowerLevelSolution:
        """Solve the lower level at beta, reusing the cache when possible."""
        pr = self.problem
        beta = pr.check_beta(beta)
        key = cache_key(beta)
        hit = self._cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit

        if warm is None:
            warm = self._nearest_cached(beta)
        y, u, p = self._initial_point(beta, warm)
        N = pr.grid.n_nodes
        dense = N <= _DENSE_MAX_NODES

        residual, proj = self._residual(beta, y, u, p)
        res_norm = float(np.max(np.abs(residual)))
        iterations = 0
        while res_norm > self.tol:
            if iterations >= self.max_iter:
                raise SolverError(
                    f"lower level at beta={beta} stalled: residual {res_norm:.3e} "
                    f"after {iterations} iterations"
                )
            chi = ((p / pr.sigma_l >= pr.u_lower) & (p / pr.sigma_l <= pr.u_upper)).astype(float)
            if dense:
                M = self._newton_matrix_dense(beta, chi)
                step = np.linalg.solve(M, -residual)
            else:
                M = self._newton_matrix_sparse(beta, chi)
                step = spla.splu(M).solve(-residual)
            accepted = False
            for j in range(_DAMPING_STEPS + 1):
                t = 2.0**-j
                y_n, u_n, p_n = y + t * step[:N], u + t * step[N:2 * N], p + t * step[2 * N:]
                residual_n, proj_n = self._residual(beta, y_n, u_n, p_n)
                res_norm_n = float(np.max(np.abs(residual_n)))
                if res_norm_n <= (1.0 - 2.0 ** (-j - 2)) * res_norm or res_norm_n <= self.tol:
                    y, u, p = y_n, u_n, p_n
                    residual, proj, res_norm = residual_n, proj_n, res_norm_n
                    accepted = True
                    break
            if not accepted:
                raise SolverError(
                    f"lower level at beta={beta}: no admissible damped step "
                    f"(residual {res_norm:.3e})"
                )
            iterations += 1

        diff = y[None, :] - pr.desired
        track = pr.grid.h**2 * np.einsum("ij,ij->i", diff, diff)
        phi = float(np.dot(0.5 / beta, track)) + 0.5 * pr.sigma_l * pr.grid.h**2 * float(
            np.dot(u, u)
        )
        ratio = p / pr.sigma_l
        solution = LowerLevelSolution(
            beta=beta.copy(),
            phi=phi,
            track=track,
            iterations=iterations,
            active_lower=int(np.sum(ratio < pr.u_lower)),
            active_upper=int(np.sum(ratio > pr.u_upper)),
            y=y,
            u=u,
            p=p,
        )
        self._cache[key] = solution
        self._with_vectors.append(key)
        self._note_candidate(key, beta)
        self.total_solves += 1
        self.total_newton_iters += iterations
        while len(self._with_vectors) > self.vector_limit:
            old_key = self._with_vectors.popleft()
            old = self._cache[old_key]
            old.y = old.u = old.p = None
            row = self._row_of.pop(old_key, None)
            if row is not None:
                self._beta_rows[row] = np.inf
        return solution

    # -- value function ---------------------------------------------------

    def value_function(self, beta: Vector) -> tuple[float, LowerLevelSolution]:
        """phi(beta) together with the solution record that produced it."""
        sol = self.solve(beta)
        return sol.phi, sol

    def phi_gradient(self, solution: LowerLevelSolution) -> Vector:
        """Gradient of phi at the solution's beta (envelope formula)."""
        return -0.5 * solution.track / solution.beta**2
