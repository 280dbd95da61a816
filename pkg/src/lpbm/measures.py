"""Measure engines: exact low-dimensional volume, seeded Monte Carlo for
Gaussian and density measures, and density-property probes.

Every stochastic result is an Estimate carrying a standard error; verifiers
never consume bare floats.  Streams are counter-based (rng.stream), so a
fixed (seed, labels, n_samples) always reproduces the same Estimate bit for
bit, regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ndtr

from . import geometry, rng as rngmod
from .geometry import Ball, Body, GeometryError, SupportTable, VPolytope


def unit_ball_volume(n: int) -> float:
    """kappa_n = pi^(n/2) / Gamma(n/2 + 1)."""
    return float(math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)))


@dataclass(frozen=True)
class Estimate:
    """Numeric value with standard error; method is 'exact' or 'mc'."""

    value: float
    std_error: float
    n_samples: int
    method: str = "mc"

    def __post_init__(self):
        if self.method == "exact" and self.std_error != 0.0:
            raise ValueError("exact estimates carry zero std_error")

    @staticmethod
    def exact(value: float) -> "Estimate":
        return Estimate(float(value), 0.0, 0, "exact")


def pool(estimates) -> Estimate:
    """Combine independent shard estimates of the same quantity."""
    ests = list(estimates)
    ns = np.array([e.n_samples for e in ests], dtype=np.float64)
    total = ns.sum()
    value = float(np.dot(ns, [e.value for e in ests]) / total)
    var = float(np.dot(ns ** 2, [e.std_error ** 2 for e in ests]) / total ** 2)
    return Estimate(value, math.sqrt(var), int(total), "mc")


# ---------------------------------------------------------------------------
# density families (closed enum of named closed forms)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Density1D:
    """Named 1-D density: gaussian | exp_abs | indicator(a,b) | two_intervals."""

    family: str
    params: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.family == "gaussian":
            return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if self.family == "exp_abs":
            return 0.5 * np.exp(-np.abs(x))
        if self.family == "indicator":
            a, b = self.params
            return ((x >= a) & (x <= b)).astype(np.float64)
        if self.family == "two_intervals":
            a, b, c, d = self.params
            return (((x >= a) & (x <= b)) | ((x >= c) & (x <= d))).astype(np.float64)
        raise ValueError(f"unknown 1-D density family {self.family!r}")

    def integral(self, a: float, b: float) -> float:
        """Closed-form integral over [a, b] (test oracle and exact box path)."""
        if self.family == "gaussian":
            return float(ndtr(b) - ndtr(a))
        if self.family == "exp_abs":
            def cdf(t):
                return 0.5 * math.exp(t) if t <= 0 else 1.0 - 0.5 * math.exp(-t)
            return cdf(b) - cdf(a)
        if self.family == "indicator":
            lo, hi = self.params
            return max(0.0, min(b, hi) - max(a, lo))
        raise ValueError(f"no closed-form integral for {self.family!r}")

    def sampler(self, gen: np.random.Generator, count: int):
        """(samples, total mass) when the family has a direct sampler."""
        if self.family == "gaussian":
            return gen.standard_normal(count), 1.0
        if self.family == "exp_abs":
            return gen.laplace(0.0, 1.0, count), 1.0
        if self.family == "indicator":
            a, b = self.params
            return gen.uniform(a, b, count), b - a
        return None


@dataclass(frozen=True)
class DensityND:
    """Named density on R^n: gaussian | exp_norm | power_cap(beta) |
    quad_form(Q) | norm (the radially increasing counterexample)."""

    family: str
    dimension: int
    params: tuple = ()

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r2 = np.einsum("ij,ij->i", pts, pts)
        if self.family == "gaussian":
            return np.exp(-0.5 * r2) / (2.0 * math.pi) ** (self.dimension / 2.0)
        if self.family == "exp_norm":
            return np.exp(-np.sqrt(r2))
        if self.family == "power_cap":
            (beta,) = self.params
            return np.maximum(1.0 - r2, 0.0) ** (1.0 / beta)
        if self.family == "quad_form":
            Q = np.asarray(self.params[0], dtype=np.float64)
            return np.exp(-np.einsum("ij,jk,ik->i", pts, Q, pts))
        if self.family == "norm":
            return np.sqrt(r2)
        raise ValueError(f"unknown density family {self.family!r}")

    def support_radius(self) -> float:
        return 1.0 if self.family == "power_cap" else np.inf


@dataclass(frozen=True)
class MeasureSpec:
    """lebesgue | gaussian | product (1-D factors) | radial (DensityND)."""

    variant: str
    factors: tuple = ()
    density: DensityND | None = None
    dimension: int = 0

    @staticmethod
    def lebesgue(n: int) -> "MeasureSpec":
        return MeasureSpec("lebesgue", dimension=n)

    @staticmethod
    def gaussian(n: int) -> "MeasureSpec":
        return MeasureSpec("gaussian", dimension=n)

    @staticmethod
    def product(factors) -> "MeasureSpec":
        factors = tuple(factors)
        return MeasureSpec("product", factors=factors, dimension=len(factors))

    @staticmethod
    def radial(density: DensityND) -> "MeasureSpec":
        return MeasureSpec("radial", density=density, dimension=density.dimension)

    def density_at(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if self.variant == "lebesgue":
            return np.ones(len(pts))
        if self.variant == "gaussian":
            return DensityND("gaussian", self.dimension)(pts)
        if self.variant == "product":
            out = np.ones(len(pts))
            for i, f in enumerate(self.factors):
                out *= f(pts[:, i])
            return out
        return self.density(pts)


# ---------------------------------------------------------------------------
# volume engines
# ---------------------------------------------------------------------------


def volume_exact(K: Body) -> Estimate:
    """Exact Lebesgue volume: fan/tetrahedral triangulation for polytopes in
    n <= 3, kappa_n r^n for balls.  Raises for unsupported representations."""
    if isinstance(K, Ball):
        return Estimate.exact(unit_ball_volume(K.dim) * K.radius ** K.dim)
    if isinstance(K, SupportTable):
        return volume_exact(geometry._cached_outer(K))
    data = geometry._hull_data(K)
    if data["volume"] is None:
        raise GeometryError("exact volume unavailable; use volume_mc")
    return Estimate.exact(data["volume"])


def _binomial_estimate(hits: int, n_samples: int, scale: float) -> Estimate:
    p = hits / n_samples
    se = scale * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
    return Estimate(scale * p, se, n_samples, "mc")


def volume_mc(K: Body, seed: int, n_samples: int, labels=("volume_mc",)) -> Estimate:
    """Hit-or-miss volume over the support bounding box."""
    lo, hi = geometry.bounding_box(K)
    widths = hi - lo
    if (widths <= 0).any():
        raise GeometryError("degenerate bounding box")
    box_vol = float(np.prod(widths))
    gen = rngmod.stream(seed, *labels)
    pts = gen.random((n_samples, K.dim)) * widths + lo
    hits = int(geometry.contains_points(K, pts).sum())
    return _binomial_estimate(hits, n_samples, box_vol)


def gaussian_measure(K: Body, seed: int, n_samples: int,
                     labels=("gaussian_mc",)) -> Estimate:
    """Standard Gaussian measure of K; exact product-CDF path for boxes."""
    box = geometry.as_box(K) if isinstance(K, VPolytope) else None
    if box is not None:
        lo, hi = box
        return Estimate.exact(float(np.prod(ndtr(hi) - ndtr(lo))))
    gen = rngmod.stream(seed, *labels)
    pts = gen.standard_normal((n_samples, K.dim))
    hits = int(geometry.contains_points(K, pts).sum())
    return _binomial_estimate(hits, n_samples, 1.0)


def density_measure(K: Body, spec: MeasureSpec, seed: int, n_samples: int,
                    labels=("density_mc",)) -> Estimate:
    """MC integral of the density over K.

    Product measures with direct per-axis samplers and quad_form densities
    use importance sampling (binomial error); everything else integrates
    uniform bounding-box samples against the density.
    """
    if spec.variant == "lebesgue":
        return volume_mc(K, seed, n_samples, labels)
    if spec.variant == "gaussian":
        return gaussian_measure(K, seed, n_samples, labels)
    gen = rngmod.stream(seed, *labels)
    if spec.variant == "product":
        draws = [f.sampler(gen, n_samples) for f in spec.factors]
        if all(d is not None for d in draws):
            pts = np.column_stack([d[0] for d in draws])
            mass = float(np.prod([d[1] for d in draws]))
            hits = int(geometry.contains_points(K, pts).sum())
            return _binomial_estimate(hits, n_samples, mass)
    if spec.variant == "radial" and spec.density.family == "quad_form":
        Q = np.asarray(spec.density.params[0], dtype=np.float64)
        cov = np.linalg.inv(2.0 * Q)
        zconst = math.pi ** (spec.dimension / 2.0) / math.sqrt(np.linalg.det(Q))
        chol = np.linalg.cholesky(cov)
        pts = gen.standard_normal((n_samples, spec.dimension)) @ chol.T
        hits = int(geometry.contains_points(K, pts).sum())
        return _binomial_estimate(hits, n_samples, zconst)
    # generic path: uniform box sampling against the density
    lo, hi = geometry.bounding_box(K)
    if spec.variant == "radial":
        r = spec.density.support_radius()
        if np.isfinite(r):
            lo = np.maximum(lo, -r)
            hi = np.minimum(hi, r)
    widths = np.maximum(hi - lo, 0.0)
    if (widths <= 0).any():
        return Estimate(0.0, 0.0, n_samples, "mc")
    box_vol = float(np.prod(widths))
    pts = gen.random((n_samples, K.dim)) * widths + lo
    f = spec.density_at(pts)
    if not np.isfinite(f).all():
        raise ValueError("density undefined at a sample point")
    f = f * geometry.contains_points(K, pts)
    value = box_vol * float(f.mean())
    se = box_vol * float(f.std(ddof=1)) / math.sqrt(n_samples)
    return Estimate(value, se, n_samples, "mc")


def measure_of_body(K: Body, spec: MeasureSpec, seed: int, n_samples: int,
                    labels=("measure",)) -> Estimate:
    """Dispatch to the exact path when one exists, else Monte Carlo."""
    if spec.variant == "lebesgue":
        try:
            return volume_exact(K)
        except GeometryError:
            return volume_mc(K, seed, n_samples, labels)
    if spec.variant == "gaussian":
        return gaussian_measure(K, seed, n_samples, labels)
    if spec.variant == "product":
        box = geometry.as_box(K) if isinstance(K, VPolytope) else None
        if box is not None:
            lo, hi = box
            try:
                val = 1.0
                for i, f in enumerate(spec.factors):
                    val *= f.integral(float(lo[i]), float(hi[i]))
                return Estimate.exact(val)
            except ValueError:
                pass
    return density_measure(K, spec, seed, n_samples, labels)


# ---------------------------------------------------------------------------
# density property probes
# ---------------------------------------------------------------------------


@dataclass
class ProbeReport:
    ok: bool
    witnesses: list = field(default_factory=list)


def is_radially_decreasing(density, dimension: int, probe_budget: int = 2000,
                           seed: int = 0, t_max: float = 4.0,
                           eps: float = 1e-9) -> ProbeReport:
    """Probe f(t x) <= f(x) for t >= 1 on random rays; reports violations."""
    gen = rngmod.stream(seed, "radial_probe")
    x = gen.standard_normal((probe_budget, dimension)) * 1.5
    t = gen.uniform(1.0, t_max, probe_budget)
    fx = np.asarray(density(x), dtype=np.float64)
    ftx = np.asarray(density(x * t[:, None]), dtype=np.float64)
    bad = np.flatnonzero(ftx > fx + eps)
    witnesses = [(x[i].tolist(), float(t[i]), float(fx[i]), float(ftx[i]))
                 for i in bad[:5]]
    return ProbeReport(ok=len(bad) == 0, witnesses=witnesses)


def is_beta_concave(density, dimension: int, beta: float | None,
                    probe_budget: int = 2000, seed: int = 0,
                    box_halfwidth: float = 1.5, eps: float = 1e-9) -> ProbeReport:
    """Probe the beta-concavity inequality on random (x, y, lam) triples;
    beta=None checks log-concavity f((1-l)x+ly) >= f(x)^(1-l) f(y)^l."""
    gen = rngmod.stream(seed, "concavity_probe")
    x = gen.uniform(-box_halfwidth, box_halfwidth, (probe_budget, dimension))
    y = gen.uniform(-box_halfwidth, box_halfwidth, (probe_budget, dimension))
    lam = gen.uniform(0.05, 0.95, probe_budget)
    fx = np.asarray(density(x), dtype=np.float64)
    fy = np.asarray(density(y), dtype=np.float64)
    fz = np.asarray(density((1.0 - lam[:, None]) * x + lam[:, None] * y),
                    dtype=np.float64)
    live = (fx > 0) & (fy > 0)
    if beta is None:
        bound = fx ** (1.0 - lam) * fy ** lam
    else:
        bound = ((1.0 - lam) * fx ** beta + lam * fy ** beta) ** (1.0 / beta)
    bad = np.flatnonzero(live & (fz + eps < bound))
    witnesses = [(x[i].tolist(), y[i].tolist(), float(lam[i]),
                  float(fz[i]), float(bound[i])) for i in bad[:5]]
    return ProbeReport(ok=len(bad) == 0, witnesses=witnesses)


__all__ = [
    "Estimate", "pool", "Density1D", "DensityND", "MeasureSpec",
    "unit_ball_volume", "volume_exact", "volume_mc", "gaussian_measure",
    "density_measure", "measure_of_body", "is_radially_decreasing",
    "is_beta_concave", "ProbeReport",
]
