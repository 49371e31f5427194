"""Simplicial geometry: Kuhn triangulations, bisection-free 2^n refinement,
facet halfspaces, and per-simplex affine interpolation.

A simplex is stored as an ordered vertex tuple (v_0, ..., v_n): the affine
image of the reference simplex {0 <= x_1 <= ... <= x_n <= 1}, whose ordered
vertices r_j carry ones in the last j coordinates.  The box Q is tiled by
the n! simplices obtained from all coordinate orderings (Kuhn/Freudenthal
triangulation).

Refinement maps the reference simplex onto its 2^n congruence children

    {0 <= x_pi(1) - t_pi(1) <= ... <= x_pi(n) - t_pi(n) <= 1/2},

one for every split index k in {0..n} and every order-preserving
interleaving pi of the coordinate blocks {1..k} (shift 0) and {k+1..n}
(shift 1/2).  Every child vertex has reference coordinates in {0, 1/2, 1},
i.e. it is a parent vertex or an edge midpoint; physical coordinates are
formed as exact averages of parent vertices so that value-function cache
keys collide exactly across neighbouring simplices.  Children tile the
parent, each with volume vol(parent)/2^n, and their reference shapes are
coordinate permutations of (1/2) * reference, so the reference aspect ratio
is preserved at every depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations
from math import comb, factorial
from typing import Literal

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

Status = Literal["active", "refined", "dismissed", "incumbent"]

ACTIVE: Status = "active"
REFINED: Status = "refined"
DISMISSED: Status = "dismissed"
INCUMBENT: Status = "incumbent"


@dataclass
class Simplex:
    """One element of the subdivision of the weight box Q."""

    uid: int
    depth: int
    vertices: Matrix  # (n+1, n), ordered Kuhn chart
    K: Matrix  # (n+1, n) outward unit facet normals
    b: Vector  # K @ x <= b describes the simplex
    volume: float
    phi_vertices: Vector | None = None
    xi_grad: Vector | None = None
    xi_offset: float = 0.0
    gamma_inherited: float = 0.0
    lower_bound: float = -np.inf
    status: Status = ACTIVE
    created_iter: int = 0
    parent: int | None = None
    solved: object | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def centroid(self) -> Vector:
        return self.vertices.mean(axis=0)

    def diameter(self) -> float:
        return simplex_diameter(self.vertices)

    def contains(self, point: Vector, tol: float = 1e-12) -> bool:
        return bool(np.all(self.K @ point - self.b <= tol))

    def xi_value(self, beta: Vector) -> float:
        if self.xi_grad is None:
            raise ValueError(f"simplex {self.uid} has no interpolant yet")
        return float(np.dot(self.xi_grad, beta)) + self.xi_offset

    @property
    def is_active(self) -> bool:
        return self.status in (ACTIVE, INCUMBENT)


def simplex_volume(vertices: Matrix) -> float:
    edges = vertices[1:] - vertices[0]
    return abs(float(np.linalg.det(edges))) / factorial(vertices.shape[1])


def simplex_diameter(vertices: Matrix) -> float:
    diff = vertices[:, None, :] - vertices[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff**2, axis=-1))))


def halfspaces(vertices: Matrix) -> tuple[Matrix, Vector]:
    """Outward unit facet normals K and offsets b with T = {K x <= b}.

    Row i corresponds to the facet opposite vertex i.
    """
    m, n = vertices.shape
    if m != n + 1:
        raise ValueError(f"need n+1 vertices in R^n, got shape {vertices.shape}")
    spans = np.linalg.svd(vertices[1:] - vertices[0], compute_uv=False)
    if spans[-1] <= 1e-12 * max(spans[0], 1e-300):
        raise ValueError("degenerate simplex: vertices span no full-dimensional cell")
    K = np.zeros((n + 1, n))
    b = np.zeros(n + 1)
    for i in range(n + 1):
        facet = np.delete(vertices, i, axis=0)
        edges = facet[1:] - facet[0]
        # unit normal of the facet's affine hull: the right singular direction
        # orthogonal to all n-1 edges
        _, sing, vt = np.linalg.svd(edges, full_matrices=True)
        if n > 1 and sing[-1] <= 1e-12 * sing[0]:
            raise ValueError("degenerate simplex: facet edges are rank deficient")
        normal = vt[-1]
        offset = float(np.dot(normal, facet[0]))
        if np.dot(normal, vertices[i]) > offset:  # orient away from vertex i
            normal, offset = -normal, -offset
        K[i] = normal
        b[i] = offset
    return K, b


def aspect_ratio(vertices: Matrix) -> float:
    """Inscribed-ball diameter over simplex diameter, in (0, 1]."""
    m, n = vertices.shape
    vol = simplex_volume(vertices)
    if vol == 0.0:
        return 0.0
    if n == 1:
        return 1.0
    surface = 0.0
    for i in range(m):
        facet = np.delete(vertices, i, axis=0)
        edges = facet[1:] - facet[0]
        gram = edges @ edges.T
        surface += float(np.sqrt(max(np.linalg.det(gram), 0.0))) / factorial(n - 1)
    inradius = n * vol / surface
    return 2.0 * inradius / simplex_diameter(vertices)


def build_xi(vertices: Matrix, values: Vector) -> tuple[Vector, float]:
    """Affine interpolant xi(beta) = grad . beta + offset of vertex values.

    By convexity of the interpolated function, xi overestimates it on the
    simplex and matches it at the vertices.
    """
    m, n = vertices.shape
    values = np.asarray(values, dtype=float)
    if values.shape != (m,):
        raise ValueError(f"need one value per vertex, got {values.shape}")
    system = np.hstack([vertices, np.ones((m, 1))])
    try:
        coeffs = np.linalg.solve(system, values)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate simplex: interpolation system singular") from exc
    return coeffs[:n], float(coeffs[n])


def _make_simplex(uid: int, depth: int, vertices: Matrix, *, created_iter: int = 0,
                  parent: int | None = None, gamma_inherited: float = 0.0) -> Simplex:
    K, b = halfspaces(vertices)
    return Simplex(
        uid=uid,
        depth=depth,
        vertices=vertices,
        K=K,
        b=b,
        volume=simplex_volume(vertices),
        created_iter=created_iter,
        parent=parent,
        gamma_inherited=gamma_inherited,
    )


def initial_triangulation(box_lower: Vector, box_upper: Vector) -> list[Simplex]:
    """Tile the box with n! Kuhn simplices (ids 0..n!-1, depth 0)."""
    lower = np.asarray(box_lower, dtype=float)
    upper = np.asarray(box_upper, dtype=float)
    n = lower.size
    if np.any(upper <= lower):
        raise ValueError("box must have positive extent in every coordinate")
    simplices = []
    for uid, perm in enumerate(permutations(range(n))):
        ref = np.zeros((n + 1, n))
        for j in range(1, n + 1):
            ref[j] = ref[j - 1]
            ref[j, perm[n - j]] += 1.0
        simplices.append(_make_simplex(uid, 0, lower + (upper - lower) * ref))
    return simplices


@lru_cache(maxsize=None)
def _child_midpoint_table(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """For each of the 2^n reference children, the (a, b) parent-vertex index
    pairs whose midpoints are the child's ordered vertices."""
    table = []
    for k in range(n + 1):
        for slots in combinations(range(n), k):
            pi = np.empty(n, dtype=int)
            pi[list(slots)] = np.arange(k)
            rest = [p for p in range(n) if p not in slots]
            pi[rest] = np.arange(k, n)
            child = []
            for j in range(n + 1):
                # reference coordinates: x[pi[i]] = shift[pi[i]] + 1/2*[i >= n-j]
                coords = np.zeros(n)
                for i in range(n):
                    coords[pi[i]] = (0.0 if pi[i] < k else 0.5) + (0.5 if i >= n - j else 0.0)
                ones = int(np.sum(coords == 1.0))
                halves = int(np.sum(coords == 0.5))
                child.append((ones, ones + halves))
            table.append(tuple(child))
    assert len(table) == 2**n == sum(comb(n, kk) for kk in range(n + 1))
    return tuple(table)


def refine(simplex: Simplex, next_uid: int, created_iter: int = 0) -> list[Simplex]:
    """Split a simplex into its 2^n children (ids next_uid, next_uid+1, ...).

    Child vertices are exact averages of parent vertex pairs; the parent's
    status is left untouched (the driver marks it refined).
    """
    n = simplex.dim
    children = []
    for offset, pairs in enumerate(_child_midpoint_table(n)):
        verts = np.empty_like(simplex.vertices)
        for j, (a, bb) in enumerate(pairs):
            verts[j] = 0.5 * (simplex.vertices[a] + simplex.vertices[bb])
        children.append(
            _make_simplex(
                next_uid + offset,
                simplex.depth + 1,
                verts,
                created_iter=created_iter,
                parent=simplex.uid,
                gamma_inherited=simplex.gamma_inherited,
            )
        )
    return children
