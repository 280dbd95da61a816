"""Inequality verification harness.

Each theorem instance is checked on generated body pairs: the left side is
the functional of the L_p combination, the right side the p-power mean of
the pair's functional values times the theorem constant.  Both sides carry
standard errors; a check fails only when the slack is below -k sigma.

Approximation discipline for p > 1 combinations: the combination body is
bracketed by an inner body (convex hull of mu-grid slices, or the slice
union itself when the summands miss the origin) and an outer support table.
Verdicts always use the conservative side: the inner body for increasing
functionals in >= inequalities, and again the inner body for decreasing
functionals (polar quermassintegrals) in <= inequalities, where the smaller
body gives the larger left side.  Outer values are logged for measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import functionals, geometry, measures, psum, rng as rngmod
from .functionals import UFunction
from .geometry import Ball, Body, DirectionGrid, VPolytope
from .measures import Estimate, MeasureSpec
from .psum import PCombinationSpec

EPS_ABS = 1e-9

GENERATORS = (
    "symmetric_polytope", "unconditional_box", "weakly_unconditional",
    "reflection_invariant", "dilatate_pair", "identical_pair",
    "generic_origin_interior", "shifted_compact", "point_cloud",
)


@dataclass(frozen=True)
class FunctionalSpec:
    """What gets evaluated on bodies: a measure, the Wills functional, its
    generalized form, or a polar quermassintegral W_i((.)^*)."""

    kind: str
    measure: MeasureSpec | None = None
    gauge: Body | None = None
    u: UFunction | None = None
    polar_index: int = 0

    def __post_init__(self):
        if self.kind not in ("measure", "wills", "generalized_wills",
                             "polar_quermass"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "measure" and self.measure is None:
            raise ValueError("measure functional needs a MeasureSpec")
        if self.kind == "generalized_wills" and (self.gauge is None or self.u is None):
            raise ValueError("generalized Wills needs a gauge body and a u family")

    @property
    def increasing(self) -> bool:
        return self.kind != "polar_quermass"


@dataclass
class InequalitySpec:
    """One family of inequality instances F(combo) >= C * p-mean (alpha > 0),
    or the reversed form for alpha < 0."""

    name: str
    functional: FunctionalSpec
    alpha: float
    C: float = 1.0
    p_set: tuple = (1.0, 1.5, 2.0, 4.0)
    lambda_set: tuple = (0.25, 0.5, 0.75)
    direction: str = ">="
    families: tuple = ()

    def __post_init__(self):
        if self.alpha == 0:
            raise ValueError("alpha must be nonzero")
        if self.direction not in (">=", "<="):
            raise ValueError("direction must be '>=' or '<='")
        expected = ">=" if self.alpha > 0 else "<="
        if self.direction != expected:
            raise ValueError(
                f"direction {self.direction} inconsistent with alpha={self.alpha}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if any(p < 1 for p in self.p_set):
            raise ValueError("p values must be >= 1")
        if any(not 0 < l < 1 for l in self.lambda_set):
            raise ValueError("lambda values must lie in (0,1)")


@dataclass
class PairFamily:
    """Seeded generator of (K, L) pairs with a checked family predicate."""

    name: str
    generator: str
    dimension: int
    count: int = 20
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if not 1 <= self.dimension <= 4:
            raise ValueError("dimension must be 1..4")
        if self.count < 1:
            raise ValueError("count must be positive")

    @property
    def origin_inside(self) -> bool:
        return self.generator not in ("shifted_compact", "point_cloud")


@dataclass
class VerificationRecord:
    suite: str
    pair_id: int
    n: int
    lam: float
    p: float
    lhs: Estimate
    rhs: Estimate
    fk: Estimate
    fl: Estimate
    slack: float
    sigma: float
    slack_sigma: float
    verdict: str
    expect_equality: bool
    lhs_outer: float | None = None


# ---------------------------------------------------------------------------
# pair generation
# ---------------------------------------------------------------------------


def _fit_into_radius(V: np.ndarray, radius: float) -> np.ndarray:
    top = np.linalg.norm(V, axis=1).max()
    return V * (radius / top) if top > radius else V


def _gen_symmetric(gen, n):
    k = int(gen.integers(n + 1, 3 * n + 1))
    X = gen.standard_normal((k, n))
    return geometry.convex_hull(np.concatenate([X, -X], axis=0))


def _gen_box(gen, n):
    a = gen.uniform(0.3, 1.6, n)
    b = gen.uniform(0.3, 1.6, n)
    corners = np.array(np.meshgrid(*[(-a[i], b[i]) for i in range(n)],
                                   indexing="ij")).reshape(n, -1).T
    return geometry.convex_hull(corners)


def _gen_weakly(gen, n):
    k = int(gen.integers(n + 1, 2 * n + 3))
    X = gen.standard_normal((k, n)) * 1.2
    masks = np.array(np.meshgrid(*([[0.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    orbit = (X[:, None, :] * masks[None, :, :]).reshape(-1, n)
    return geometry.convex_hull(orbit)


def _random_rotation(gen, n):
    M = gen.standard_normal((n, n))
    Q, R = np.linalg.qr(M)
    return Q * np.sign(np.diag(R))


def _gen_reflection(gen, n, Q):
    k = int(gen.integers(n + 1, 2 * n + 3))
    X = gen.standard_normal((k, n))
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    orbit = (X[:, None, :] * signs[None, :, :]).reshape(-1, n)
    return geometry.convex_hull(orbit @ Q.T)


def _gen_generic(gen, n):
    k = int(gen.integers(2 * n + 2, 4 * n + 3))
    X = gen.standard_normal((k, n))
    hull = geometry.convex_hull(X)
    verts = geometry.hull_vertices(hull)
    return VPolytope(verts - verts.mean(axis=0))


def generate_pairs(family: PairFamily, master_seed: int = 0) -> list:
    """Deterministic (K, L) pairs; every pair is re-checked against the
    family predicate (a generation bug raises rather than polluting a suite)."""
    seed = family.seed if family.seed is not None else master_seed
    n = family.dimension
    fit_radius = family.params.get("fit_radius")
    pairs = []
    for idx in range(family.count):
        gen = rngmod.stream(seed, "pair", family.name, idx)
        if family.generator == "symmetric_polytope":
            K, L = _gen_symmetric(gen, n), _gen_symmetric(gen, n)
        elif family.generator == "unconditional_box":
            K, L = _gen_box(gen, n), _gen_box(gen, n)
        elif family.generator == "weakly_unconditional":
            K, L = _gen_weakly(gen, n), _gen_weakly(gen, n)
        elif family.generator == "reflection_invariant":
            Q = _random_rotation(gen, n)
            K, L = _gen_reflection(gen, n, Q), _gen_reflection(gen, n, Q)
        elif family.generator == "dilatate_pair":
            K = _gen_generic(gen, n)
            r = float(gen.uniform(1.2, 3.0))
            K, L = K, geometry.scale(K, r)
        elif family.generator == "identical_pair":
            K = _gen_generic(gen, n)
            L = K
        elif family.generator == "generic_origin_interior":
            K, L = _gen_generic(gen, n), _gen_generic(gen, n)
        elif family.generator == "shifted_compact":
            K, L = _gen_generic(gen, n), _gen_generic(gen, n)
            shift_k = gen.standard_normal(n)
            shift_l = gen.standard_normal(n)
            K = geometry.translate(K, (1.2 * geometry.circumradius(K) + 0.3)
                                   * shift_k / np.linalg.norm(shift_k))
            L = geometry.translate(L, (1.2 * geometry.circumradius(L) + 0.3)
                                   * shift_l / np.linalg.norm(shift_l))
        else:  # point_cloud
            kk = int(gen.integers(2 * n + 2, 4 * n + 6))
            K = VPolytope(gen.standard_normal((kk, n)))
            L = VPolytope(gen.standard_normal((kk, n)))
        if fit_radius is not None:
            K = VPolytope(_fit_into_radius(K.vertices, fit_radius))
            L = VPolytope(_fit_into_radius(L.vertices, fit_radius))
        _check_family_predicate(family, K, L)
        pairs.append((K, L))
    return pairs


def _check_family_predicate(family: PairFamily, K: VPolytope, L: VPolytope):
    gname = family.generator
    if gname == "symmetric_polytope":
        for B in (K, L):
            V = geometry.hull_vertices(B)
            if not geometry._vertex_sets_equal(V, -V, 1e-9):
                raise RuntimeError("generated body is not 0-symmetric")
    elif gname == "unconditional_box":
        for B in (K, L):
            if geometry.as_box(B) is None:
                raise RuntimeError("generated body is not a box")
    elif gname == "weakly_unconditional":
        for B in (K, L):
            if not geometry.is_weakly_unconditional(B, tol=1e-7):
                raise RuntimeError("generated body is not weakly unconditional")
    elif gname == "reflection_invariant":
        pass  # invariance is by orbit construction; probed in tests
    elif gname in ("dilatate_pair", "identical_pair", "generic_origin_interior"):
        for B in (K, L):
            if geometry.origin_interior_margin(B) <= 0:
                raise RuntimeError("origin not interior to generated body")
    elif gname == "shifted_compact":
        for B in (K, L):
            if geometry.contains_points(B, np.zeros((1, family.dimension)))[0]:
                raise RuntimeError("shifted body still contains the origin")


# ---------------------------------------------------------------------------
# functional evaluation
# ---------------------------------------------------------------------------


_GRID_CACHE: dict = {}


def cached_grid(n: int, m: int) -> DirectionGrid:
    key = (n, m)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = geometry.direction_grid(n, m)
    return _GRID_CACHE[key]


@dataclass
class EvalContext:
    """Execution knobs: sampling budget, grid resolutions, verdict thresholds."""

    seed: int = 0
    n_samples: int = 20_000
    grid_m: int = 360
    mu_resolution: int = 257
    sigma_k: float = 3.0
    bonferroni: bool = True
    log_outer: bool = True
    suite_size: int = 1

    def fail_threshold(self) -> float:
        """Bonferroni-corrected fail threshold in sigma units."""
        if not self.bonferroni or self.suite_size <= 1:
            return self.sigma_k
        alpha_one = 2.0 * (1.0 - _phi(self.sigma_k))
        corrected = max(alpha_one / self.suite_size, 1e-300)
        return float(max(self.sigma_k, ndtri(1.0 - corrected / 2.0)))


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def eval_functional(fspec: FunctionalSpec, body: Body, ctx: EvalContext,
                    labels: tuple) -> Estimate:
    """Value of the functional on one body, exact path preferred."""
    if fspec.kind == "measure":
        return measures.measure_of_body(body, fspec.measure, ctx.seed,
                                        ctx.n_samples, labels)
    if fspec.kind == "wills":
        if body.dim <= 2 or isinstance(body, Ball):
            return functionals.wills_steiner(body)
        return functionals.wills_hadwiger(body, ctx.seed, ctx.n_samples,
                                          labels + ("hadwiger",))
    if fspec.kind == "generalized_wills":
        if isinstance(body, (VPolytope, Ball)) and isinstance(fspec.gauge, VPolytope) \
                and body.dim <= 3 and isinstance(body, VPolytope):
            fit = functionals.quermassintegrals_fit(body, fspec.gauge,
                                                    labels=labels + ("fit",))
            return functionals.weights_series(fit, fspec.u)
        return functionals.generalized_wills(body, fspec.gauge, fspec.u,
                                             ctx.seed, ctx.n_samples, labels)
    # polar quermassintegral W_i(body*)
    pol = geometry.polar(body)
    fit = functionals.quermassintegrals_fit(
        pol, Ball(np.zeros(body.dim), 1.0), seed=ctx.seed,
        n_samples=ctx.n_samples, labels=labels + ("polar_fit",))
    return fit.quermassintegral(fspec.polar_index)


def _power_mean_rhs(ineq: InequalitySpec, lam: float, p: float,
                    fk: Estimate, fl: Estimate) -> Estimate:
    """C ((1-lam) F(K)^{p a} + lam F(L)^{p a})^{1/(p a)} with delta-method
    error propagation."""
    pa = p * ineq.alpha
    a, b = fk.value, fl.value
    if a <= 0 or b <= 0:
        raise ValueError("pair not admissible: functional values must be positive")
    M = (1.0 - lam) * a ** pa + lam * b ** pa
    value = ineq.C * M ** (1.0 / pa)
    da = ineq.C * M ** (1.0 / pa - 1.0) * (1.0 - lam) * a ** (pa - 1.0)
    db = ineq.C * M ** (1.0 / pa - 1.0) * lam * b ** (pa - 1.0)
    se = math.hypot(da * fk.std_error, db * fl.std_error)
    n_used = fk.n_samples + fl.n_samples
    return Estimate(float(value), float(se), n_used,
                    "exact" if se == 0.0 else "mc")


def _verdict(slack: float, sigma: float, expect_equality: bool,
             ctx: EvalContext) -> str:
    k_fail = ctx.fail_threshold()
    if slack < -(k_fail * sigma + EPS_ABS):
        return "fail"
    if abs(slack) <= ctx.sigma_k * sigma + EPS_ABS and not expect_equality:
        return "inconclusive"
    return "pass"


def _combination_bodies(K: VPolytope, L: VPolytope, spec: PCombinationSpec,
                        ctx: EvalContext, origin_inside: bool):
    """(inner body or None, outer table or None, mu grid).

    p = 1 yields the exact Minkowski combination as the inner body.
    """
    if spec.p == 1.0:
        inner = geometry.minkowski_sum(geometry.scale(K, 1.0 - spec.lam),
                                       geometry.scale(L, spec.lam))
        return inner, None, None
    include = [spec.lam]
    mgrid = psum.mu_grid(ctx.mu_resolution, include=include)
    if origin_inside:
        inner = psum.combination_inner_hull(K, L, spec, mgrid)
        grid = cached_grid(K.dim, ctx.grid_m)
        outer = psum.firey_combination(K, L, spec, grid)
        return inner, outer, mgrid
    return None, None, mgrid


def _measure_of_union(K, L, spec, mgrid, mspec: MeasureSpec, ctx, labels) -> Estimate:
    """MC measure of the union of mu-grid slices (inner approximation of the
    point-set combination for bodies missing the origin)."""
    t, s = psum.combination_coefficients(spec, mgrid.values)
    lows, highs = [], []
    for ti, si in zip(t, s):
        loK, hiK = geometry.bounding_box(K)
        loL, hiL = geometry.bounding_box(L)
        lows.append(ti * loK + si * loL)
        highs.append(ti * hiK + si * hiL)
    lo = np.min(lows, axis=0)
    hi = np.max(highs, axis=0)
    gen = rngmod.stream(ctx.seed, *labels)
    n_samples = ctx.n_samples
    if mspec.variant == "gaussian":
        pts = gen.standard_normal((n_samples, K.dim))
        weights = np.ones(n_samples)
        scale_ = 1.0
    else:
        widths = hi - lo
        pts = gen.random((n_samples, K.dim)) * widths + lo
        weights = mspec.density_at(pts)
        scale_ = float(np.prod(widths))
    mask = psum.combination_contains(pts, K, L, spec, psum.mu_grid(65))
    f = weights * mask
    value = scale_ * float(f.mean())
    se = scale_ * float(f.std(ddof=1)) / math.sqrt(n_samples)
    return Estimate(value, se, n_samples, "mc")


def check_lp_bm(ineq: InequalitySpec, K: VPolytope, L: VPolytope, lam: float,
                p: float, ctx: EvalContext, suite: str = "", pair_id: int = 0,
                origin_inside: bool = True,
                expect_equality: bool = False) -> VerificationRecord:
    """One inequality instance at (lam, p); conservative side as per module
    docstring."""
    fspec = ineq.functional
    fk = eval_functional(fspec, K, ctx, (suite, pair_id, "fk"))
    fl = eval_functional(fspec, L, ctx, (suite, pair_id, "fl"))
    return _record_from_values(ineq, K, L, lam, p, ctx, suite, pair_id,
                               origin_inside, expect_equality, fk, fl)


def _record_from_values(ineq, K, L, lam, p, ctx, suite, pair_id, origin_inside,
                        expect_equality, fk, fl) -> VerificationRecord:
    fspec = ineq.functional
    spec = PCombinationSpec(p, lam)
    inner, outer, mgrid = _combination_bodies(K, L, spec, ctx, origin_inside)
    labels = (suite, pair_id, f"lam{lam}", f"p{p}")
    lhs_outer = None
    if inner is not None:
        lhs = eval_functional(fspec, inner, ctx, labels + ("lhs",))
        if (outer is not None and ctx.log_outer and fspec.kind == "measure"):
            lhs_outer = measures.density_measure(
                outer, fspec.measure, ctx.seed, ctx.n_samples,
                labels + ("lhs_outer",)).value
    else:
        if fspec.kind != "measure":
            raise ValueError("union-route combinations support measure functionals only")
        lhs = _measure_of_union(K, L, spec, mgrid, fspec.measure, ctx,
                                labels + ("lhs_union",))
    rhs = _power_mean_rhs(ineq, lam, p, fk, fl)
    raw = lhs.value - rhs.value
    slack = raw if ineq.direction == ">=" else -raw
    sigma = math.hypot(lhs.std_error, rhs.std_error)
    verdict = _verdict(slack, sigma, expect_equality, ctx)
    return VerificationRecord(
        suite=suite, pair_id=pair_id, n=K.dim, lam=lam, p=p, lhs=lhs, rhs=rhs,
        fk=fk, fl=fl, slack=float(slack), sigma=float(sigma),
        slack_sigma=float(slack / max(sigma, EPS_ABS)), verdict=verdict,
        expect_equality=expect_equality, lhs_outer=lhs_outer)


def check_minkowski_bm(ineq: InequalitySpec, K: VPolytope, L: VPolytope,
                       lam: float, ctx: EvalContext, suite: str = "",
                       pair_id: int = 0,
                       expect_equality: bool = False) -> VerificationRecord:
    """The p = 1 base case through the exact Minkowski sum."""
    return check_lp_bm(ineq, K, L, lam, 1.0, ctx, suite, pair_id,
                       origin_inside=True, expect_equality=expect_equality)


def check_polar_lp_bm(i: int, K: VPolytope, L: VPolytope, p: float, lam: float,
                      ctx: EvalContext, suite: str = "polar",
                      pair_id: int = 0) -> VerificationRecord:
    """Polar quermassintegral inequality
    W_i([combo]*)^{-p/(n-i)} >= (1-lam) W_i(K*)^{-p/(n-i)} + lam W_i(L*)^{-p/(n-i)},
    checked in its alpha = -1/(n-i) <= form."""
    n = K.dim
    if not 0 <= i <= n - 1:
        raise ValueError("polar index must satisfy 0 <= i <= n-1")
    ineq = InequalitySpec(
        name=f"polar_w{i}", alpha=-1.0 / (n - i), C=1.0, direction="<=",
        functional=FunctionalSpec("polar_quermass", polar_index=i),
        p_set=(p,), lambda_set=(lam,))
    return check_lp_bm(ineq, K, L, lam, p, ctx, suite, pair_id)


@dataclass
class EqualityProbeReport:
    records: list
    min_slack_sigma: float
    min_config: tuple
    max_abs_slack_sigma: float


def equality_probe(ineq: InequalitySpec, K: VPolytope, L: VPolytope,
                   lam_grid, p_grid, ctx: EvalContext,
                   expect_equality: bool = False,
                   suite: str = "equality_probe") -> EqualityProbeReport:
    """Scan slack over a (lam, p) grid and report the minimum-slack config."""
    fspec = ineq.functional
    fk = eval_functional(fspec, K, ctx, (suite, 0, "fk"))
    fl = eval_functional(fspec, L, ctx, (suite, 0, "fl"))
    records = []
    for lam in lam_grid:
        for p in p_grid:
            records.append(_record_from_values(
                ineq, K, L, float(lam), float(p), ctx, suite, 0, True,
                expect_equality, fk, fl))
    sigmas = [r.slack_sigma for r in records]
    imin = int(np.argmin(sigmas))
    return EqualityProbeReport(
        records=records,
        min_slack_sigma=float(sigmas[imin]),
        min_config=(records[imin].lam, records[imin].p),
        max_abs_slack_sigma=float(max(abs(s) for s in sigmas)))


# ---------------------------------------------------------------------------
# suite runner
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    records: list
    n_pass: int
    n_fail: int
    n_inconclusive: int
    min_slack_sigma: float
    median_slack_nonequal: float


def run_suite(ineq: InequalitySpec, family: PairFamily, ctx: EvalContext,
              master_seed: int = 0) -> SuiteResult:
    """All (pair, lambda, p) records of one inequality over one family."""
    suite = f"{ineq.name}@{family.name}"
    pairs = generate_pairs(family, master_seed)
    ctx.suite_size = len(pairs) * len(ineq.lambda_set) * len(ineq.p_set)
    records = []
    for pid, (K, L) in enumerate(pairs):
        fspec = ineq.functional
        fk = eval_functional(fspec, K, ctx, (suite, pid, "fk"))
        fl = eval_functional(fspec, L, ctx, (suite, pid, "fl"))
        for lam in ineq.lambda_set:
            for p in ineq.p_set:
                expect = _expect_equality(ineq, family, float(p))
                records.append(_record_from_values(
                    ineq, K, L, float(lam), float(p), ctx, suite, pid,
                    family.origin_inside, expect, fk, fl))
    return summarize(suite, records)


def summarize(name: str, records: list) -> SuiteResult:
    slacks = [r.slack_sigma for r in records]
    non_eq = [r.slack for r in records if not r.expect_equality]
    return SuiteResult(
        name=name,
        records=records,
        n_pass=sum(r.verdict == "pass" for r in records),
        n_fail=sum(r.verdict == "fail" for r in records),
        n_inconclusive=sum(r.verdict == "inconclusive" for r in records),
        min_slack_sigma=float(min(slacks)) if slacks else 0.0,
        median_slack_nonequal=float(np.median(non_eq)) if non_eq else 0.0)


def _expect_equality(ineq: InequalitySpec, family: PairFamily, p: float) -> bool:
    if ineq.C != 1.0:
        return False
    if family.generator == "identical_pair":
        return True
    if family.generator == "dilatate_pair" and p == 1.0:
        # homothety gives equality for volume; dilatates for the polar case
        return ineq.functional.kind in ("measure", "polar_quermass") and \
            (ineq.functional.kind == "polar_quermass"
             or ineq.functional.measure.variant == "lebesgue")
    return False


__all__ = [
    "FunctionalSpec", "InequalitySpec", "PairFamily", "VerificationRecord",
    "EvalContext", "generate_pairs", "eval_functional", "check_lp_bm",
    "check_minkowski_bm", "check_polar_lp_bm", "equality_probe",
    "EqualityProbeReport", "run_suite", "summarize", "SuiteResult",
    "cached_grid", "GENERATORS", "EPS_ABS",
]
