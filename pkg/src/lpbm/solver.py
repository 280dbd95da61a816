"""Small dense linear programming, membership tests and convex distances.

The LP core is a two-phase dense simplex with Bland's rule (deterministic,
anti-cycling), sized for problems with at most a few hundred variables.  On
top of it sit the geometric queries: polytope membership, gauge distances
d_E(x, K) = min{t >= 0 : x in K + tE}, and euclidean projection distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernels
from .geometry import Ball, Body, GeometryError, SupportTable, VPolytope, hull_vertices

MAX_VARS = 200
MAX_CONSTRAINTS = 400
FEAS_TOL = 1e-8

_STATUS_NAMES = {
    kernels.OPTIMAL: "optimal",
    kernels.INFEASIBLE: "infeasible",
    kernels.UNBOUNDED: "unbounded",
    kernels.ITERATION_LIMIT: "iteration_limit",
    kernels.SINGULAR: "singular",
}


class SolverError(RuntimeError):
    """Numerical failure (singular basis, iteration cap, size overflow)."""


@dataclass
class LpProblem:
    """min/max c.x subject to rows (a, relation, rhs) and variable bounds.

    relation is "<=" or "="; bounds default to x >= 0 with no upper bound.
    A lower bound of -inf makes the variable free.
    """

    objective: np.ndarray
    constraints: list
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        n = self.objective.shape[0]
        if n == 0:
            raise ValueError("at least one variable required")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.lower = (np.zeros(n) if self.lower is None
                      else np.asarray(self.lower, dtype=np.float64))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=np.float64))
        rows = []
        for a, rel, rhs in self.constraints:
            a = np.asarray(a, dtype=np.float64)
            if a.shape != (n,):
                raise ValueError("constraint row dimension mismatch")
            if rel not in ("<=", "="):
                raise ValueError(f"unsupported relation {rel!r}")
            rows.append((a, rel, float(rhs)))
        self.constraints = rows
        if not (np.isfinite(self.objective).all()
                and all(np.isfinite(a).all() and np.isfinite(r) for a, _, r in rows)):
            raise ValueError("non-finite problem data")


@dataclass
class LpSolution:
    status: str
    value: float
    point: np.ndarray
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))


def solve_lp(problem: LpProblem, tol: float = 1e-9, maxiter: int = 20000) -> LpSolution:
    """Deterministic two-phase simplex solve of an LpProblem."""
    c0 = problem.objective.copy()
    n0 = c0.shape[0]
    rows = list(problem.constraints)
    lower, upper = problem.lower, problem.upper
    # finite upper bounds become explicit rows
    for i in range(n0):
        if np.isfinite(upper[i]):
            e = np.zeros(n0)
            e[i] = 1.0
            rows.append((e, "<=", float(upper[i])))
    if n0 > MAX_VARS or len(rows) > MAX_CONSTRAINTS:
        raise SolverError(
            f"problem too large: {n0} vars / {len(rows)} constraints "
            f"(caps {MAX_VARS}/{MAX_CONSTRAINTS})")
    # variable transform: shift finite lower bounds, split free variables
    shift = np.where(np.isfinite(lower), lower, 0.0)
    free = ~np.isfinite(lower)
    n_std = n0 + int(free.sum())
    neg_col = {}
    j = n0
    for i in np.flatnonzero(free):
        neg_col[i] = j
        j += 1

    def expand(row):
        out = np.zeros(n_std)
        out[:n0] = row
        for i, jj in neg_col.items():
            out[jj] = -row[i]
        return out

    m = len(rows)
    n_slack = sum(1 for _, rel, _ in rows if rel == "<=")
    A = np.zeros((m, n_std + n_slack))
    b = np.zeros(m)
    sl = 0
    for r, (a, rel, rhs) in enumerate(rows):
        A[r, :n_std] = expand(a)
        b[r] = rhs - float(a @ shift)
        if rel == "<=":
            A[r, n_std + sl] = 1.0
            sl += 1
    c = np.zeros(n_std + n_slack)
    sign = -1.0 if problem.sense == "max" else 1.0
    c[:n_std] = sign * expand(c0)

    status, x, value, y = kernels.simplex_standard(A, b, c, tol, maxiter)
    name = _STATUS_NAMES[status]
    if status in (kernels.SINGULAR, kernels.ITERATION_LIMIT):
        raise SolverError(f"simplex failed: {name}")
    if status != kernels.OPTIMAL:
        return LpSolution(name, np.nan, np.full(n0, np.nan))
    point = x[:n0] + shift
    for i, jj in neg_col.items():
        point[i] -= x[jj]
    return LpSolution("optimal", float(sign * value), point,
                      dual=sign * y[:len(problem.constraints)])


def in_hull_of(x, points, tol: float = FEAS_TOL) -> bool:
    """LP feasibility of x = sum(lam_i p_i), sum(lam) = 1, lam >= 0."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    k, n = points.shape
    scale = max(1.0, float(np.abs(points).max()))
    A = np.concatenate([points.T / scale, np.ones((1, k))], axis=0)
    b = np.concatenate([x / scale, [1.0]])
    c = np.zeros(k)
    status, _x, _v, _y = kernels.simplex_standard(A, b, c, max(tol / scale, 1e-12), 20000)
    if status in (kernels.SINGULAR, kernels.ITERATION_LIMIT):
        raise SolverError("membership LP failed")
    return status == kernels.OPTIMAL


def membership(x, K: Body, tol: float = FEAS_TOL) -> bool:
    """x in K.  VPolytope via LP feasibility over vertex weights; Ball via the
    norm test; SupportTable via the (outer) grid inequality test."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if isinstance(K, Ball):
        return bool(np.linalg.norm(x - K.center) <= K.radius + tol)
    if isinstance(K, SupportTable):
        return bool((K.grid.directions @ x <= K.values + tol).all())
    return in_hull_of(x, K.vertices, tol)


def polar_support_lp(vertices: np.ndarray, u: np.ndarray) -> float:
    """h(K*, u) = max <x,u> s.t. <x, v_i> <= 1 (0 interior assumed)."""
    k, n = vertices.shape
    prob = LpProblem(
        objective=np.asarray(u, dtype=np.float64),
        constraints=[(vertices[i], "<=", 1.0) for i in range(k)],
        lower=np.full(n, -np.inf),
        sense="max",
    )
    sol = solve_lp(prob)
    if sol.status != "optimal":
        raise SolverError(f"polar support LP {sol.status}")
    return sol.value


# ---------------------------------------------------------------------------
# euclidean distance
# ---------------------------------------------------------------------------


def frank_wolfe_distance(x, vertices, gap_tol: float = 1e-9, maxiter: int = 10000):
    """Distance from x to conv(vertices) by Frank-Wolfe over vertex weights.

    Exact line search on the quadratic objective; stops on duality gap
    < gap_tol or the iteration cap.  Returns (distance, gap).
    """
    V = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = V[0].copy()
    gap = np.inf
    for _ in range(maxiter):
        g = y - x
        s = V[int(np.argmin(V @ g))]
        d = s - y
        gap = float(-g @ d)
        if gap <= gap_tol:
            break
        dd = float(d @ d)
        if dd <= 0.0:
            break
        gamma = min(1.0, max(0.0, float(-(g @ d)) / dd))
        if gamma <= 0.0:
            break
        y = y + gamma * d
    return float(np.linalg.norm(y - x)), gap


def _distance_features(K: VPolytope):
    """Feature arrays for exact distance in n <= 3 (None if unsupported)."""
    cache = K._cache
    if "dist_features" in cache:
        return cache["dist_features"]
    data = geometry._hull_data(K)
    verts = data["vertices"]
    n = K.dim
    feats = None
    if len(verts) == 1:
        feats = ("point", verts[0])
    elif n == 1:
        feats = ("interval", (float(verts.min()), float(verts.max())))
    elif data["rank"] == 1:
        center = verts.mean(axis=0)
        rank, basis = geometry.affine_dim(verts)
        coord = (verts - center) @ basis[:, 0]
        p = verts[int(np.argmin(coord))]
        q = verts[int(np.argmax(coord))]
        feats = ("segments", (p[None, :], q[None, :]), None)
    elif n == 2 and data["rank"] == 2:
        from scipy.spatial import ConvexHull

        hull = ConvexHull(verts)
        ordered = verts[hull.vertices]
        P = ordered
        Q = np.roll(ordered, -1, axis=0)
        feats = ("segments", (P, Q), (data["normals"], data["offsets"]))
    elif n == 3 and data["rank"] == 3:
        tris = data["simplices"]
        feats = ("triangles", (tris[:, 0], tris[:, 1], tris[:, 2]),
                 (data["normals"], data["offsets"]))
    cache["dist_features"] = feats
    return feats


def euclidean_distance_many(points, K: Body) -> np.ndarray:
    """Vectorized min_{y in K} ||x - y|| for each row x."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if isinstance(K, Ball):
        return np.maximum(np.linalg.norm(pts - K.center, axis=1) - K.radius, 0.0)
    if isinstance(K, SupportTable):
        return euclidean_distance_many(pts, geometry._cached_outer(K))
    feats = _distance_features(K)
    if feats is None:
        return np.array([frank_wolfe_distance(p, K.vertices)[0] for p in pts])
    kind = feats[0]
    if kind == "point":
        return np.linalg.norm(pts - feats[1], axis=1)
    if kind == "interval":
        lo, hi = feats[1]
        v = pts[:, 0]
        return np.maximum(np.maximum(lo - v, v - hi), 0.0)
    if kind == "segments":
        (P, Q), halfspaces = feats[1], feats[2]
        d = kernels.segment_distance_batch(pts, P, Q)
    else:
        (A, B, C), halfspaces = feats[1], feats[2]
        d = kernels.triangle_distance_batch(pts, A, B, C)
    if halfspaces is not None:
        inside = kernels.points_in_halfspaces(pts, halfspaces[0], halfspaces[1])
        d = np.where(inside, 0.0, d)
    return d


def euclidean_distance(x, K: Body) -> float:
    """min_{y in K} ||x - y||; exact feature projection in n <= 3, Frank-Wolfe
    (gap 1e-9, cap 10000) in n = 4."""
    return float(euclidean_distance_many(np.asarray(x, dtype=np.float64)[None, :], K)[0])


# ---------------------------------------------------------------------------
# gauge distance d_E(x, K)
# ---------------------------------------------------------------------------


def _check_gauge_bodies(K: Body, E: Body):
    if isinstance(E, Ball):
        if np.linalg.norm(E.center) > 1e-9:
            raise GeometryError("gauge ball must be centered at the origin")
        return None
    if not isinstance(E, VPolytope):
        raise GeometryError("gauge body must be a ball or a vertex polytope")
    if geometry.origin_interior_margin(E) <= 0:
        raise GeometryError("gauge body must contain the origin in its interior")
    if not isinstance(K, VPolytope):
        raise GeometryError("gauge distance to non-polytope bodies is unsupported")
    return hull_vertices(E)


def gauge_distance_many(points, K: Body, E: Body) -> np.ndarray:
    """d_E(x, K) = min{t >= 0 : x in K + tE} for each row x of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    VE = _check_gauge_bodies(K, E)
    if VE is None:
        return euclidean_distance_many(pts, K) / E.radius
    VK = hull_vertices(K)
    out = np.zeros(len(pts))
    inside = geometry.contains_points(K, pts)
    todo = ~inside
    if todo.any():
        vals, stat = kernels.gauge_batch(pts[todo], VK, VE)
        if (stat != kernels.OPTIMAL).any():
            bad = int((stat != kernels.OPTIMAL).sum())
            raise SolverError(f"gauge LP failed for {bad} points")
        out[todo] = np.maximum(vals, 0.0)
    return out


def gauge_distance(x, K: Body, E: Body) -> float:
    return float(gauge_distance_many(np.asarray(x, dtype=np.float64)[None, :], K, E)[0])


__all__ = [
    "LpProblem", "LpSolution", "SolverError", "solve_lp", "membership",
    "in_hull_of", "polar_support_lp", "euclidean_distance",
    "euclidean_distance_many", "gauge_distance", "gauge_distance_many",
    "frank_wolfe_distance", "FEAS_TOL",
]
