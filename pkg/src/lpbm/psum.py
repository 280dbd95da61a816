"""L_p addition of bodies: support-function form and point-set form.

For p >= 1 and weights (1-lam, lam), the combination uses the p-scalar rule
r . K = r^(1/p) K, so its support in direction u is
((1-lam) h_K(u)^p + lam h_L(u)^p)^(1/p) whenever both supports are
nonnegative (bodies containing the origin).  The point-set form
{(1-mu)^(1/q) x + mu^(1/q) y : mu in [0,1]} works for arbitrary nonempty
sets and coincides with the support-function form on convex bodies
containing 0; q is the Holder conjugate of p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import (Body, DirectionGrid, GeometryError, SupportTable,
                       VPolytope, hull_vertices, support_vector)


@dataclass(frozen=True)
class PCombinationSpec:
    """Weights and exponent of one L_p combination (1-lam).K +_p lam.L."""

    p: float
    lam: float

    def __post_init__(self):
        if not self.p >= 1.0:
            raise ValueError("p must be >= 1")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")

    @property
    def q(self) -> float:
        """Holder conjugate: 1/p + 1/q = 1 (infinite when p = 1)."""
        return np.inf if self.p == 1.0 else self.p / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class MuGrid:
    """Sorted mu values in [0,1] containing both endpoints."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.unique(np.asarray(self.values, dtype=np.float64))
        if vals[0] != 0.0 or vals[-1] != 1.0:
            raise ValueError("mu grid must contain 0 and 1")
        if ((vals < 0) | (vals > 1)).any():
            raise ValueError("mu values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)
        self.values.setflags(write=False)


def mu_grid(resolution: int = 256, include=()) -> MuGrid:
    vals = np.linspace(0.0, 1.0, resolution)
    if len(include):
        vals = np.concatenate([vals, np.asarray(include, dtype=np.float64)])
    return MuGrid(np.clip(vals, 0.0, 1.0))


def optimal_mu(spec: PCombinationSpec, fk: float, fl: float, alpha: float) -> float:
    """The mu at which the combination bound is tight for functional values
    fk = F(K), fl = F(L): mu* = lam fl^(p a) / ((1-lam) fk^(p a) + lam fl^(p a))."""
    wa = (1.0 - spec.lam) * fk ** (spec.p * alpha)
    wb = spec.lam * fl ** (spec.p * alpha)
    return float(wb / (wa + wb))


def combination_coefficients(spec: PCombinationSpec, mu) -> tuple:
    """(t, s) with t = (1-mu)^(1/q) (1-lam)^(1/p), s = mu^(1/q) lam^(1/p).

    For p = 1 the mu-dependent factors are 1 by convention.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if spec.p == 1.0:
        t = np.full_like(mu, 1.0 - spec.lam)
        s = np.full_like(mu, spec.lam)
        return t, s
    invq = 1.0 - 1.0 / spec.p
    t = (1.0 - mu) ** invq * (1.0 - spec.lam) ** (1.0 / spec.p)
    s = mu ** invq * spec.lam ** (1.0 / spec.p)
    return t, s


def _psum_support_pair(a, b, spec: PCombinationSpec, mu_values) -> np.ndarray:
    """Support of the point-set combination: sup over mu of t(mu) a + s(mu) b.

    a, b are the supports of K and L in a batch of directions.  For a,b >= 0
    the supremum has the closed form ((1-lam) a^p + lam b^p)^(1/p); negative
    supports (origin outside a body) fall back to the max over the mu grid
    with the interior stationary point added.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if spec.p == 1.0:
        return (1.0 - spec.lam) * a + spec.lam * b
    p = spec.p
    out = np.empty_like(a)
    nonneg = (a >= 0) & (b >= 0)
    out[nonneg] = ((1.0 - spec.lam) * a[nonneg] ** p
                   + spec.lam * b[nonneg] ** p) ** (1.0 / p)
    rest = ~nonneg
    if rest.any():
        t, s = combination_coefficients(spec, mu_values)
        vals = t[None, :] * a[rest, None] + s[None, :] * b[rest, None]
        out[rest] = vals.max(axis=1)
    return out


def firey_combination(K: Body, L: Body, spec: PCombinationSpec,
                      grid: DirectionGrid) -> SupportTable:
    """Support table of (1-lam).K +_p lam.L; requires 0 in K and 0 in L."""
    hk = support_vector(K, grid)
    hl = support_vector(L, grid)
    if hk.min() < -1e-12 or hl.min() < -1e-12:
        raise GeometryError("support-function combination needs the origin in both bodies")
    hk = np.maximum(hk, 0.0)
    hl = np.maximum(hl, 0.0)
    if spec.p == 1.0:
        vals = (1.0 - spec.lam) * hk + spec.lam * hl
    else:
        vals = ((1.0 - spec.lam) * hk ** spec.p + spec.lam * hl ** spec.p) ** (1.0 / spec.p)
    return SupportTable(grid, vals, approximate=True)


def combination_support_table(K: Body, L: Body, spec: PCombinationSpec,
                              grid: DirectionGrid,
                              mgrid: MuGrid | None = None) -> SupportTable:
    """Support table of the point-set combination for arbitrary bodies
    (origin not required); outer approximation of the true set."""
    if mgrid is None:
        mgrid = mu_grid()
    hk = support_vector(K, grid)
    hl = support_vector(L, grid)
    vals = _psum_support_pair(hk, hl, spec, mgrid.values)
    return SupportTable(grid, vals, approximate=True)


def combination_vertex_cloud(K: VPolytope, L: VPolytope, spec: PCombinationSpec,
                             mgrid: MuGrid) -> np.ndarray:
    """All points t(mu) v + s(mu) w over vertices and the mu grid."""
    VK = hull_vertices(K)
    VL = hull_vertices(L)
    t, s = combination_coefficients(spec, mgrid.values)
    pts = (t[:, None, None, None] * VK[None, :, None, :]
           + s[:, None, None, None] * VL[None, None, :, :])
    return pts.reshape(-1, K.dim)


def combination_inner_hull(K: VPolytope, L: VPolytope, spec: PCombinationSpec,
                           mgrid: MuGrid | None = None) -> VPolytope:
    """Convex hull of the mu-grid slices of the point-set combination.

    This is an inner approximation of the combination body whenever the true
    combination is convex (convex summands containing the origin); verifiers
    use it for the favorable side of >= inequalities.
    """
    if mgrid is None:
        mgrid = mu_grid()
    return geometry.convex_hull(combination_vertex_cloud(K, L, spec, mgrid))


def combination_contains(points, K: VPolytope, L: VPolytope,
                         spec: PCombinationSpec, mgrid: MuGrid | None = None,
                         tol: float = 1e-9) -> np.ndarray:
    """Membership in the union of mu-grid slices t(mu) K + s(mu) L.

    Sound inner test for the point-set combination even when it is
    non-convex (origin outside the summands).
    """
    if mgrid is None:
        mgrid = mu_grid(65)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    t, s = combination_coefficients(spec, mgrid.values)
    mask = np.zeros(len(pts), dtype=bool)
    seen = set()
    for ti, si in zip(t, s):
        key = (round(float(ti), 12), round(float(si), 12))
        if key in seen:
            continue
        seen.add(key)
        slice_body = geometry.minkowski_sum(geometry.scale(K, float(ti)),
                                            geometry.scale(L, float(si)))
        todo = ~mask
        if not todo.any():
            break
        mask[todo] |= geometry.contains_points(slice_body, pts[todo], tol)
    return mask


def lyz_point_combination(K, L, spec: PCombinationSpec, mgrid: MuGrid,
                          samples_per_mu: int = 0, rng=None) -> np.ndarray:
    """Point cloud {t(mu) x + s(mu) y} over the mu grid.

    K and L may be point arrays or bodies; bodies contribute their vertices
    plus optional uniform interior samples.
    """
    def _points(S):
        if isinstance(S, VPolytope):
            pts = hull_vertices(S)
            if samples_per_mu > 0:
                if rng is None:
                    raise ValueError("interior sampling needs an rng")
                pts = np.concatenate(
                    [pts, geometry.sample_interior(S, rng, samples_per_mu)], axis=0)
            return pts
        if isinstance(S, geometry.Ball):
            if rng is None or samples_per_mu <= 0:
                raise ValueError("ball inputs need interior sampling")
            return geometry.sample_interior(S, rng, samples_per_mu)
        pts = np.atleast_2d(np.asarray(S, dtype=np.float64))
        if pts.size == 0:
            raise GeometryError("empty point set")
        return pts

    X = _points(K)
    Y = _points(L)
    t, s = combination_coefficients(spec, mgrid.values)
    pts = (t[:, None, None, None] * X[None, :, None, :]
           + s[:, None, None, None] * Y[None, None, :, :])
    return pts.reshape(-1, X.shape[1])


@dataclass
class InclusionReport:
    n_samples: int
    violations: int
    max_violation: float
    support_gap_max: float
    support_gap_min: float


def inclusion_check(K: VPolytope, L: VPolytope, spec: PCombinationSpec,
                    grid: DirectionGrid, mgrid: MuGrid, n_samples: int,
                    rng, tol: float = 1e-9) -> InclusionReport:
    """Check (1-lam) K + lam L inside the p-combination body.

    Samples standard convex combinations z = (1-lam)x + lam y and tests them
    against the combination support table (outer test).  Also reports the
    per-direction support gap h_combination - h_minkowski, which is >= 0 by
    the power-mean inequality and identically ~0 when K = L contains 0.
    """
    if spec.p <= 1.0:
        raise ValueError("inclusion check applies to p > 1")
    table = combination_support_table(K, L, spec, grid, mgrid)
    X = geometry.sample_interior(K, rng, n_samples)
    Y = geometry.sample_interior(L, rng, n_samples)
    Z = (1.0 - spec.lam) * X + spec.lam * Y
    slack = table.values[None, :] - Z @ grid.directions.T
    worst = slack.min(axis=1)
    violations = int((worst < -tol).sum())
    hm = (1.0 - spec.lam) * support_vector(K, grid) + spec.lam * support_vector(L, grid)
    gap = table.values - hm
    return InclusionReport(
        n_samples=n_samples,
        violations=violations,
        max_violation=float(max(0.0, -worst.min())) if len(worst) else 0.0,
        support_gap_max=float(gap.max()),
        support_gap_min=float(gap.min()),
    )


__all__ = [
    "PCombinationSpec", "MuGrid", "mu_grid", "optimal_mu",
    "combination_coefficients", "firey_combination",
    "combination_support_table", "combination_inner_hull",
    "combination_vertex_cloud", "combination_contains",
    "lyz_point_combination", "inclusion_check", "InclusionReport",
]
