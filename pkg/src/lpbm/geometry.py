"""Convex body representations and exact geometric operations.

Bodies live in R^n for 1 <= n <= 4 and come in three flavors: vertex
polytopes, euclidean balls, and support-function tables on a fixed direction
grid.  All bodies are immutable values; every operation returns a new body.
A SupportTable always describes the OUTER polytope of its grid constraints,
so set computations done through tables over-approximate the true body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.special import ndtri
from scipy.stats import qmc

from . import kernels

DEDUP_EPS = 1e-9


class GeometryError(ValueError):
    """Raised for invalid geometric inputs (zero directions, bad grids, ...)."""


def _as_points(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise GeometryError("empty point set")
    if not np.isfinite(pts).all():
        raise GeometryError("non-finite coordinates")
    if not 1 <= pts.shape[1] <= 4:
        raise GeometryError(f"dimension {pts.shape[1]} outside supported range 1..4")
    return pts


def dedup_points(pts: np.ndarray, eps: float = DEDUP_EPS) -> np.ndarray:
    """Drop near-duplicate rows (absolute tolerance eps).

    Large inputs are first collapsed on a rounding grid well below eps; the
    exact tolerance pass runs on the survivors.
    """
    if len(pts) > 512:
        pts = np.unique(np.round(pts, 10), axis=0)
        if len(pts) > 4096:
            return pts
    kept = np.empty_like(pts)
    count = 0
    for p in pts:
        if count == 0 or np.abs(kept[:count] - p).max(axis=1).min() > eps:
            kept[count] = p
            count += 1
    return kept[:count].copy()


# ---------------------------------------------------------------------------
# direction grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Fixed symmetric set of unit directions discretizing S^{n-1}."""

    directions: np.ndarray
    resolution: int
    dimension: int
    _index: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.directions.setflags(write=False)
        for i, u in enumerate(self.directions):
            self._index[tuple(np.round(u, 12))] = i

    def __len__(self) -> int:
        return self.directions.shape[0]

    def index_of(self, u) -> int:
        key = tuple(np.round(np.asarray(u, dtype=np.float64), 12))
        if key not in self._index:
            raise GeometryError("direction not on grid")
        return self._index[key]


def direction_grid(n: int, m: int | None = None) -> DirectionGrid:
    """Deterministic antipodally symmetric grid of ~m unit directions.

    n=1: {+1,-1}.  n=2: m equally spaced angles (m even).  n=3,4: a Halton
    low-discrepancy set mapped through the normal quantile and normalized,
    closed under u -> -u.
    """
    if m is None:
        m = 720 if n <= 2 else 2000
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
        return DirectionGrid(dirs, 2, 1)
    if n == 2:
        m = int(m) + (int(m) % 2)
        theta = 2.0 * np.pi * np.arange(m) / m
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        return DirectionGrid(dirs, m, 2)
    half = max(int(m) // 2, n + 1)
    sampler = qmc.Halton(d=n, scramble=False)
    raw = sampler.random(2 * half + 16)[1:]
    z = ndtri(np.clip(raw, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    z = z[norms > 1e-9]
    z = z / np.linalg.norm(z, axis=1, keepdims=True)
    dirs = np.concatenate([z[:half], -z[:half]], axis=0)
    return DirectionGrid(dirs, dirs.shape[0], n)


# ---------------------------------------------------------------------------
# body representations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of a finite vertex list (duplicates permitted)."""

    vertices: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        pts = _as_points(self.vertices)
        object.__setattr__(self, "vertices", pts)
        self.vertices.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True, eq=False)
class Ball:
    """Euclidean ball of positive radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if not np.isfinite(c).all():
            raise GeometryError("non-finite center")
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        self.center.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True, eq=False)
class SupportTable:
    """Support values on a grid; stands for the outer polytope of its rows."""

    grid: DirectionGrid
    values: np.ndarray
    approximate: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.grid),):
            raise GeometryError("support table shape mismatch with grid")
        if not np.isfinite(vals).all():
            raise GeometryError("non-finite support values")
        object.__setattr__(self, "values", vals)
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.grid.dimension


Body = VPolytope | Ball | SupportTable


# ---------------------------------------------------------------------------
# hull machinery (scipy Qhull with degenerate-dimension handling)
# ---------------------------------------------------------------------------


def affine_dim(pts: np.ndarray, tol: float = 1e-9):
    """(rank, orthonormal basis of the affine hull direction space)."""
    center = pts.mean(axis=0)
    M = pts - center
    if M.shape[0] == 1:
        return 0, np.zeros((pts.shape[1], 0))
    _u, s, vt = np.linalg.svd(M, full_matrices=False)
    scale = max(s[0], 1.0) if s.size else 1.0
    rank = int((s > tol * scale).sum())
    return rank, vt[:rank].T


def _hull_data(K: VPolytope) -> dict:
    """Hull-reduced vertices, facet inequalities, simplices and volume."""
    if "hull" in K._cache:
        return K._cache["hull"]
    pts = K.vertices if len(K.vertices) > 64 else dedup_points(K.vertices)
    n = pts.shape[1]
    rank, basis = affine_dim(pts)
    data: dict = {"rank": rank}
    if rank == 0:
        data.update(vertices=pts[:1], volume=0.0, normals=None, offsets=None,
                    simplices=None)
    elif rank == 1:
        center = pts.mean(axis=0)
        coord = (pts - center) @ basis[:, 0]
        vs = pts[[int(np.argmin(coord)), int(np.argmax(coord))]]
        full = n == 1
        vol = float(abs(coord.max() - coord.min())) if full else 0.0
        normals = offsets = None
        if full:
            lo, hi = vs.min(), vs.max()
            normals = np.array([[1.0], [-1.0]])
            offsets = np.array([hi, -lo])
        data.update(vertices=vs, volume=vol, normals=normals, offsets=offsets,
                    simplices=None)
    else:
        center = pts.mean(axis=0)
        coords = (pts - center) @ basis
        if rank == 4:
            # exact extreme-point filtering via LP feasibility
            from . import solver

            if len(pts) > 200:
                raise GeometryError("4-D hulls limited to 200 candidate points")
            pts = dedup_points(pts)
            coords = (pts - center) @ basis
            keep = [i for i in range(len(pts))
                    if not solver.in_hull_of(coords[i], np.delete(coords, i, axis=0))]
            data.update(vertices=pts[keep], volume=None, normals=None,
                        offsets=None, simplices=None)
        elif rank == n:
            # full-dimensional: Qhull on the raw points keeps facet equations
            # in the world frame
            hull = ConvexHull(pts)
            verts = dedup_points(pts[hull.vertices])
            data["vertices"] = verts
            eq = hull.equations
            normals = eq[:, :n]
            offsets = -eq[:, n]
            # fan triangulation from the centroid: exact volume
            simplices = pts[hull.simplices]
            g = verts.mean(axis=0)
            vol = float(np.abs(np.linalg.det(simplices - g)).sum()
                        / math.factorial(n))
            data.update(volume=vol, normals=normals, offsets=offsets,
                        simplices=simplices)
        else:
            hull = ConvexHull(coords)
            verts = dedup_points(pts[hull.vertices])
            data.update(vertices=verts, volume=0.0, normals=None, offsets=None,
                        simplices=None)
    K._cache["hull"] = data
    return data


def hull_vertices(K: VPolytope) -> np.ndarray:
    """Hull-reduced vertex set (the extreme points)."""
    return _hull_data(K)["vertices"]


def facets(K: VPolytope):
    """(normals, offsets) with K = {x : normals @ x <= offsets}; full-dim n<=3."""
    data = _hull_data(K)
    if data["normals"] is None:
        raise GeometryError("facets only available for full-dimensional bodies in n <= 3")
    return data["normals"], data["offsets"]


def convex_hull(points) -> VPolytope:
    """VPolytope on the extreme points of the input (degenerate inputs allowed)."""
    pts = _as_points(points)
    body = VPolytope(pts)
    return VPolytope(hull_vertices(body))


# ---------------------------------------------------------------------------
# support functions and basic arithmetic
# ---------------------------------------------------------------------------


def support(K: Body, u) -> float:
    """h(K, u) = max_{x in K} <x, u>.  SupportTable requires u on its grid."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if not np.any(u):
        raise GeometryError("support undefined for the zero vector")
    if isinstance(K, VPolytope):
        return float((K.vertices @ u).max())
    if isinstance(K, Ball):
        return float(K.center @ u + K.radius * np.linalg.norm(u))
    return float(K.values[K.grid.index_of(u)])


def support_vector(K: Body, grid: DirectionGrid) -> np.ndarray:
    """Support values for all grid directions at once."""
    U = grid.directions
    if isinstance(K, VPolytope):
        return (U @ K.vertices.T).max(axis=1)
    if isinstance(K, Ball):
        return U @ K.center + K.radius
    if K.grid is grid or (len(K.grid) == len(grid)
                          and np.array_equal(K.grid.directions, U)):
        return K.values.copy()
    raise GeometryError("support table evaluated on a different grid")


def scale(K: Body, r: float) -> Body:
    """r*K for r >= 0; r = 0 collapses to the origin singleton."""
    if r < 0:
        raise GeometryError("negative scaling factor")
    if r == 0:
        n = K.dim
        return VPolytope(np.zeros((1, n)))
    if isinstance(K, VPolytope):
        return VPolytope(K.vertices * r)
    if isinstance(K, Ball):
        return Ball(K.center * r, K.radius * r)
    return SupportTable(K.grid, K.values * r, K.approximate)


def translate(K: Body, v) -> Body:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if isinstance(K, VPolytope):
        return VPolytope(K.vertices + v)
    if isinstance(K, Ball):
        return Ball(K.center + v, K.radius)
    return SupportTable(K.grid, K.values + K.grid.directions @ v, K.approximate)


def minkowski_sum(K: Body, L: Body, grid: DirectionGrid | None = None) -> Body:
    """K + L.  Polytope pairs stay exact; mixed pairs need a grid and come
    back as an approximate SupportTable."""
    if isinstance(K, VPolytope) and isinstance(L, VPolytope):
        VK = hull_vertices(K)
        VL = hull_vertices(L)
        sums = (VK[:, None, :] + VL[None, :, :]).reshape(-1, K.dim)
        return convex_hull(sums)
    if isinstance(K, Ball) and isinstance(L, Ball):
        return Ball(K.center + L.center, K.radius + L.radius)
    if grid is None:
        raise GeometryError("mixed Minkowski sum requires a direction grid")
    vals = support_vector(K, grid) + support_vector(L, grid)
    return SupportTable(grid, vals, approximate=True)


def bounding_box(K: Body):
    """(lo, hi) per axis from supports along +-e_i."""
    if isinstance(K, SupportTable):
        # grid need not contain +-e_i; enumerate the outer polytope instead
        verts = _cached_outer(K).vertices
        return verts.min(axis=0), verts.max(axis=0)
    n = K.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hi[i] = support(K, e)
        lo[i] = -support(K, -e)
    return lo, hi


def _cached_outer(T: SupportTable) -> "VPolytope":
    if "outer" not in T._cache:
        T._cache["outer"] = outer_vpolytope(T, reduce=False)
    return T._cache["outer"]


def contains_points(K: Body, points, tol: float = 1e-9) -> np.ndarray:
    """Vectorized membership mask.  VPolytope uses facet tests in n<=3 and LP
    feasibility otherwise; SupportTable is the (outer) grid test."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if isinstance(K, Ball):
        return np.linalg.norm(pts - K.center, axis=1) <= K.radius + tol
    if isinstance(K, SupportTable):
        return kernels.points_in_halfspaces(pts, K.grid.directions, K.values, tol)
    data = _hull_data(K)
    if data["normals"] is not None:
        return kernels.points_in_halfspaces(pts, data["normals"], data["offsets"], tol)
    from . import solver

    return np.array([solver.membership(p, K, tol) for p in pts])


def as_box(K: Body, tol: float = 1e-9):
    """(lo, hi) if K is an axis-aligned box (as a VPolytope), else None."""
    if not isinstance(K, VPolytope):
        return None
    verts = hull_vertices(K)
    n = verts.shape[1]
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    corners = np.array(np.meshgrid(*[(lo[i], hi[i]) for i in range(n)],
                                   indexing="ij")).reshape(n, -1).T
    if len(verts) != len(corners):
        return None
    order_v = np.lexsort(verts.T)
    order_c = np.lexsort(corners.T)
    if np.allclose(verts[order_v], corners[order_c], atol=tol):
        return lo, hi
    return None


# ---------------------------------------------------------------------------
# polar bodies
# ---------------------------------------------------------------------------


def origin_interior_margin(K: Body) -> float:
    """Largest delta with B(0, delta) inside K (negative if 0 not interior)."""
    if isinstance(K, Ball):
        return float(K.radius - np.linalg.norm(K.center))
    if isinstance(K, SupportTable):
        return float(K.values.min())
    data = _hull_data(K)
    if data["normals"] is None:
        return -np.inf
    norms = np.linalg.norm(data["normals"], axis=1)
    return float((data["offsets"] / norms).min())


def polar(K: Body, grid: DirectionGrid | None = None, origin_tol: float = 1e-9) -> Body:
    """Polar body K* = {x : <x,y> <= 1 for all y in K}; requires 0 in int K.

    Exact VPolytope in n <= 3 (halfspace facets map to dual vertices); in
    n = 4 a SupportTable evaluated by LP per grid direction.
    """
    if isinstance(K, Ball):
        if np.linalg.norm(K.center) > origin_tol:
            raise GeometryError("polar of a ball supported only when centered at 0")
        return Ball(np.zeros(K.dim), 1.0 / K.radius)
    if isinstance(K, SupportTable):
        if K.values.min() <= origin_tol:
            raise GeometryError("origin not interior to support table body")
        # outer body = polar of conv{u_i/h_i}; hence (outer body)* is exact
        return convex_hull(K.grid.directions / K.values[:, None])
    margin = origin_interior_margin(K)
    if K.dim <= 3:
        if margin <= origin_tol:
            raise GeometryError("origin not interior to the body")
        normals, offsets = facets(K)
        norms = np.linalg.norm(normals, axis=1)
        return convex_hull((normals / norms[:, None]) / (offsets / norms)[:, None])
    # n = 4: support h(K*, u) = max <x,u> s.t. <x, v_i> <= 1, per direction
    if grid is None:
        raise GeometryError("polar in dimension 4 requires a direction grid")
    verts = hull_vertices(K)
    sup = support_vector(K, grid)
    if sup.min() <= origin_tol:
        raise GeometryError("origin not interior to the body")
    from . import solver

    vals = np.array([solver.polar_support_lp(verts, u) for u in grid.directions])
    return SupportTable(grid, vals, approximate=True)


def outer_vpolytope(T: SupportTable, reduce: bool = True) -> VPolytope:
    """Exact vertex form of the outer polytope of a support table (n <= 3)."""
    if T.values.min() <= 0:
        raise GeometryError("outer polytope requires positive support values")
    dual = T.grid.directions / T.values[:, None]
    if T.dim > 3:
        raise GeometryError("outer polytope enumeration restricted to n <= 3")
    dual_body = convex_hull(dual)
    normals, offsets = facets(dual_body)
    norms = np.linalg.norm(normals, axis=1)
    verts = (normals / norms[:, None]) / (offsets / norms)[:, None]
    return convex_hull(verts) if reduce else VPolytope(verts)


# ---------------------------------------------------------------------------
# symmetry predicates
# ---------------------------------------------------------------------------


def _vertex_sets_equal(A: np.ndarray, B: np.ndarray, tol: float) -> bool:
    if A.shape != B.shape:
        return False
    used = np.zeros(len(B), dtype=bool)
    for a in A:
        d = np.abs(B - a).max(axis=1)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol:
            return False
        used[j] = True
    return True


def reflect_invariant(K: VPolytope, normals, tol: float = 1e-9) -> bool:
    """True iff K is invariant under reflection through each hyperplane u^perp.

    Requires n unit normals spanning R^n (so the hyperplanes meet only at 0).
    """
    normals = _as_points(normals)
    n = K.dim
    if normals.shape[0] < n or np.linalg.matrix_rank(normals, tol=1e-9) < n:
        raise GeometryError("need n independent reflection normals")
    if not np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9):
        raise GeometryError("reflection normals must be unit vectors")
    verts = hull_vertices(K)
    for u in normals:
        # reflections are isometries, so the reflected extreme points are
        # exactly the extreme points of the reflected body
        reflected = verts - 2.0 * np.outer(verts @ u, u)
        if not _vertex_sets_equal(verts, reflected, tol):
            return False
    return True


def is_weakly_unconditional(body_or_points, tol: float = 1e-9) -> bool:
    """True iff masking any vertex by eps in {0,1}^n stays inside the body."""
    if isinstance(body_or_points, VPolytope):
        K = body_or_points
    else:
        K = VPolytope(_as_points(body_or_points))
    verts = hull_vertices(K)
    n = K.dim
    masks = np.array(np.meshgrid(*([[0.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    candidates = (verts[:, None, :] * masks[None, :, :]).reshape(-1, n)
    candidates = dedup_points(candidates)
    return bool(contains_points(K, candidates, tol=max(tol, 1e-9)).all())


# ---------------------------------------------------------------------------
# serialization (body literal format shared by CLI and fixtures)
# ---------------------------------------------------------------------------


def body_from_literal(obj: dict) -> Body:
    kind = obj.get("type")
    if kind == "vpolytope":
        return VPolytope(np.asarray(obj["vertices"], dtype=np.float64))
    if kind == "ball":
        return Ball(np.asarray(obj["center"], dtype=np.float64), float(obj["radius"]))
    raise GeometryError(f"unknown body literal type: {kind!r}")


def body_to_literal(K: Body) -> dict:
    if isinstance(K, VPolytope):
        return {"type": "vpolytope", "vertices": K.vertices.tolist()}
    if isinstance(K, Ball):
        return {"type": "ball", "center": K.center.tolist(), "radius": K.radius}
    raise GeometryError("support tables have no literal form")


def circumradius(K: Body) -> float:
    """Radius of the smallest centered-at-centroid enclosing ball (cheap bound)."""
    if isinstance(K, Ball):
        return float(K.radius)
    if isinstance(K, SupportTable):
        return float(np.abs(K.values).max())
    verts = hull_vertices(K)
    return float(np.linalg.norm(verts - verts.mean(axis=0), axis=1).max())


def sample_interior(K: Body, rng: np.random.Generator, count: int,
                    max_batches: int = 1000) -> np.ndarray:
    """Uniform samples from a full-dimensional body by bbox rejection."""
    if isinstance(K, Ball):
        u = rng.standard_normal((count, K.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = rng.random(count) ** (1.0 / K.dim)
        return K.center + K.radius * r[:, None] * u
    lo, hi = bounding_box(K)
    out = np.empty((0, K.dim))
    for _ in range(max_batches):
        pts = rng.random((max(count, 64), K.dim)) * (hi - lo) + lo
        hits = pts[contains_points(K, pts)]
        out = np.concatenate([out, hits], axis=0)
        if len(out) >= count:
            return out[:count]
    raise GeometryError("rejection sampling failed; body may be degenerate")


__all__ = [
    "GeometryError", "DirectionGrid", "direction_grid", "VPolytope", "Ball",
    "SupportTable", "Body", "convex_hull", "hull_vertices", "facets",
    "support", "support_vector", "scale", "translate", "minkowski_sum",
    "bounding_box", "contains_points", "as_box", "polar", "outer_vpolytope",
    "origin_interior_margin", "reflect_invariant", "is_weakly_unconditional",
    "body_from_literal", "body_to_literal", "circumradius", "sample_interior",
    "dedup_points", "affine_dim", "QhullError",
]
