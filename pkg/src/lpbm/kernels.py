"""Hot numeric kernels: dense simplex, batch gauge LPs, batch distances.

Every kernel has two interchangeable implementations: a loop-oriented one
compiled with numba ``@njit`` and a vectorized pure-numpy fallback.  The
active path is chosen at import time from the ``LPBM_NUMBA`` environment
variable ("0"/"off" forces the numpy path, anything else enables numba when
it is importable).  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("LPBM_NUMBA", "auto").strip().lower()
if _FLAG in ("0", "false", "off", "no"):
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    from numba import njit

    _jit = njit(cache=True)
else:
    def _jit(func):
        return func


# ---------------------------------------------------------------------------
# dense two-phase simplex (standard form: min c.x  s.t.  A x = b, x >= 0)
# ---------------------------------------------------------------------------

# status codes shared by both paths
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3
SINGULAR = 4

_PIVOT_EPS = 1e-11


@_jit
def _pivot(T, basis, row, col):
    piv = T[row, col]
    T[row, :] = T[row, :] / piv
    for i in range(T.shape[0]):
        if i != row:
            f = T[i, col]
            if f != 0.0:
                T[i, :] = T[i, :] - f * T[row, :]
    basis[row] = col


@_jit
def _iterate(T, basis, n_real, tol, maxiter):
    """Bland's rule pivoting restricted to the first ``n_real`` columns."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for _ in range(maxiter):
        enter = -1
        for j in range(n_real):
            if T[m, j] < -tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, rhs] / a
                if ratio < best - 1e-12:
                    best = ratio
                    leave = i
                elif ratio <= best + 1e-12 and leave >= 0 and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return UNBOUNDED
        if abs(T[leave, enter]) < _PIVOT_EPS:
            return SINGULAR
        _pivot(T, basis, leave, enter)
    return ITERATION_LIMIT


@_jit
def simplex_standard(A, b, c, tol, maxiter):
    """Solve min c.x s.t. A x = b, x >= 0.

    Returns (status, x, value, y) where y are the dual multipliers of the
    equality rows, reconstructed from the final basis.
    """
    m, n = A.shape
    Aw = A.copy()
    bw = b.copy()
    flip = np.ones(m)
    for i in range(m):
        if bw[i] < 0.0:
            Aw[i, :] = -Aw[i, :]
            bw[i] = -bw[i]
            flip[i] = -1.0
    ncols = n + m
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = Aw
    for i in range(m):
        T[i, n + i] = 1.0
        T[i, ncols] = bw[i]
    basis = np.arange(n, n + m)
    # phase-1 reduced costs for the artificial objective
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += T[i, j]
        T[m, j] = -s
    T[m, ncols] = -bw.sum()

    x = np.zeros(n)
    y = np.zeros(m)
    status = _iterate(T, basis, n, tol, maxiter)
    if status == UNBOUNDED:
        # phase-1 objective is bounded below by 0: treat as singular data
        return SINGULAR, x, 0.0, y
    if status != OPTIMAL:
        return status, x, 0.0, y
    feas = -T[m, ncols]
    if feas > tol * (1.0 + np.abs(bw).max() if m > 0 else 1.0):
        return INFEASIBLE, x, 0.0, y
    # drive leftover artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            pj = -1
            for j in range(n):
                if abs(T[i, j]) > 1e-9:
                    pj = j
                    break
            if pj >= 0:
                _pivot(T, basis, i, pj)
    # phase 2: rebuild the objective row for the real costs
    for j in range(ncols + 1):
        T[m, j] = 0.0
    for j in range(n):
        T[m, j] = c[j]
    for i in range(m):
        bi = basis[i]
        if bi < n and c[bi] != 0.0:
            cb = c[bi]
            T[m, :] = T[m, :] - cb * T[i, :]
    status = _iterate(T, basis, n, tol, maxiter)
    if status != OPTIMAL:
        return status, x, 0.0, y
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, ncols]
    value = 0.0
    for j in range(n):
        value += c[j] * x[j]
    # duals: y^T = c_B^T B^{-1}; B^{-1} lives in the artificial block
    for i in range(m):
        bi = basis[i]
        if bi < n and c[bi] != 0.0:
            for k in range(m):
                y[k] += c[bi] * T[i, n + k]
    for k in range(m):
        y[k] *= flip[k]
    return OPTIMAL, x, value, y


# ---------------------------------------------------------------------------
# batch gauge distances d_E(x, K) for polytopal K and E (one LP per point)
# ---------------------------------------------------------------------------


@_jit
def _gauge_batch_loop(points, VK, VE, tol, maxiter):
    npts, n = points.shape
    k = VK.shape[0]
    me = VE.shape[0]
    nvar = k + me
    A = np.zeros((n + 1, nvar))
    for j in range(k):
        for d in range(n):
            A[d, j] = VK[j, d]
        A[n, j] = 1.0
    for j in range(me):
        for d in range(n):
            A[d, k + j] = VE[j, d]
    c = np.zeros(nvar)
    for j in range(me):
        c[k + j] = 1.0
    b = np.zeros(n + 1)
    b[n] = 1.0
    out = np.empty(npts)
    stat = np.zeros(npts, np.int64)
    for idx in range(npts):
        for d in range(n):
            b[d] = points[idx, d]
        status, _x, val, _y = simplex_standard(A, b, c, tol, maxiter)
        out[idx] = val
        stat[idx] = status
    return out, stat


def _gauge_batch_numpy(points, VK, VE, tol, maxiter):
    npts, n = points.shape
    k = VK.shape[0]
    A = np.zeros((n + 1, k + VE.shape[0]))
    A[:n, :k] = VK.T
    A[n, :k] = 1.0
    A[:n, k:] = VE.T
    c = np.zeros(k + VE.shape[0])
    c[k:] = 1.0
    out = np.empty(npts)
    stat = np.zeros(npts, np.int64)
    b = np.zeros(n + 1)
    b[n] = 1.0
    for idx in range(npts):
        b[:n] = points[idx]
        status, _x, val, _y = simplex_standard(A, b, c, tol, maxiter)
        out[idx] = val
        stat[idx] = status
    return out, stat


def gauge_batch(points, VK, VE, tol=1e-9, maxiter=5000):
    """Gauge distances min{t >= 0 : x in K + tE} for each row x of ``points``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    VK = np.ascontiguousarray(VK, dtype=np.float64)
    VE = np.ascontiguousarray(VE, dtype=np.float64)
    if NUMBA_ENABLED:
        return _gauge_batch_loop(points, VK, VE, tol, maxiter)
    return _gauge_batch_numpy(points, VK, VE, tol, maxiter)


# ---------------------------------------------------------------------------
# batch euclidean distances to segment/triangle feature sets
# ---------------------------------------------------------------------------


@_jit
def _seg_dist_loop(points, P, Q):
    npts = points.shape[0]
    ns = P.shape[0]
    d = points.shape[1]
    out = np.empty(npts)
    for i in range(npts):
        best = np.inf
        for s in range(ns):
            dd = 0.0
            dot = 0.0
            for a in range(d):
                e = Q[s, a] - P[s, a]
                dd += e * e
                dot += (points[i, a] - P[s, a]) * e
            t = 0.0
            if dd > 0.0:
                t = dot / dd
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            dist2 = 0.0
            for a in range(d):
                delta = points[i, a] - (P[s, a] + t * (Q[s, a] - P[s, a]))
                dist2 += delta * delta
            if dist2 < best:
                best = dist2
        out[i] = np.sqrt(best)
    return out


def _seg_dist_numpy(points, P, Q, chunk=4096):
    E = Q - P
    L2 = np.einsum("sd,sd->s", E, E)
    L2safe = np.where(L2 > 0.0, L2, 1.0)
    out = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], chunk):
        pts = points[lo:lo + chunk]
        rel = pts[:, None, :] - P[None, :, :]
        t = np.einsum("isd,sd->is", rel, E) / L2safe
        np.clip(t, 0.0, 1.0, out=t)
        foot = P[None, :, :] + t[:, :, None] * E[None, :, :]
        d2 = np.einsum("isd,isd->is", pts[:, None, :] - foot, pts[:, None, :] - foot)
        out[lo:lo + chunk] = np.sqrt(d2.min(axis=1))
    return out


def segment_distance_batch(points, P, Q):
    """Min euclidean distance from each point to a set of segments [P_s, Q_s]."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if NUMBA_ENABLED:
        return _seg_dist_loop(points, P, Q)
    return _seg_dist_numpy(points, P, Q)


@_jit
def _tri_closest_sq(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared distance point-triangle (Ericson, Real-Time Collision Detection)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3) if d1 - d3 != 0.0 else 0.0
        qx = apx - t * abx
        qy = apy - t * aby
        qz = apz - t * abz
        return qx * qx + qy * qy + qz * qz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6) if d2 - d6 != 0.0 else 0.0
        qx = apx - t * acx
        qy = apy - t * acy
        qz = apz - t * acz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        den = (d4 - d3) + (d5 - d6)
        t = (d4 - d3) / den if den != 0.0 else 0.0
        qx = px - (bx + t * (cx - bx))
        qy = py - (by + t * (cy - by))
        qz = pz - (bz + t * (cz - bz))
        return qx * qx + qy * qy + qz * qz
    den = va + vb + vc
    v = vb / den
    w = vc / den
    qx = px - (ax + abx * v + acx * w)
    qy = py - (ay + aby * v + acy * w)
    qz = pz - (az + abz * v + acz * w)
    return qx * qx + qy * qy + qz * qz


@_jit
def _tri_dist_loop(points, A, B, C):
    npts = points.shape[0]
    nt = A.shape[0]
    out = np.empty(npts)
    for i in range(npts):
        best = np.inf
        for t in range(nt):
            d2 = _tri_closest_sq(
                points[i, 0], points[i, 1], points[i, 2],
                A[t, 0], A[t, 1], A[t, 2],
                B[t, 0], B[t, 1], B[t, 2],
                C[t, 0], C[t, 1], C[t, 2],
            )
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)
    return out


def _tri_dist_numpy(points, A, B, C, chunk=1024):
    """Vectorized point-triangle distance: project onto the plane, clamp the
    barycentric foot to the triangle via the three edge segments."""
    n1 = np.cross(B - A, C - A)
    nrm = np.linalg.norm(n1, axis=1)
    nrm = np.where(nrm > 0.0, nrm, 1.0)
    n1 = n1 / nrm[:, None]
    out = np.empty(points.shape[0])
    segP = np.concatenate([A, B, C], axis=0)
    segQ = np.concatenate([B, C, A], axis=0)
    for lo in range(0, points.shape[0], chunk):
        pts = points[lo:lo + chunk]
        rel = pts[:, None, :] - A[None, :, :]
        h = np.einsum("itd,td->it", rel, n1)
        foot = pts[:, None, :] - h[:, :, None] * n1[None, :, :]
        # barycentric test of the in-plane foot
        v0 = C - A
        v1 = B - A
        v2 = foot - A[None, :, :]
        d00 = np.einsum("td,td->t", v0, v0)
        d01 = np.einsum("td,td->t", v0, v1)
        d11 = np.einsum("td,td->t", v1, v1)
        d20 = np.einsum("itd,td->it", v2, v0)
        d21 = np.einsum("itd,td->it", v2, v1)
        den = d00 * d11 - d01 * d01
        den = np.where(np.abs(den) > 0.0, den, 1.0)
        u = (d11 * d20 - d01 * d21) / den
        v = (d00 * d21 - d01 * d20) / den
        inside = (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1.0 + 1e-12)
        plane_d = np.where(inside, np.abs(h), np.inf)
        edge_d = _seg_dist_numpy(pts, segP, segQ)
        out[lo:lo + chunk] = np.minimum(plane_d.min(axis=1), edge_d)
    return out


def triangle_distance_batch(points, A, B, C):
    """Min euclidean distance from 3-D points to a set of triangles (A,B,C)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    if NUMBA_ENABLED:
        return _tri_dist_loop(points, A, B, C)
    return _tri_dist_numpy(points, A, B, C)


# ---------------------------------------------------------------------------
# cheap vectorized predicates (single implementation; already memory-bound)
# ---------------------------------------------------------------------------


def points_in_halfspaces(points, normals, offsets, tol=1e-9):
    """Mask of points x with <x, n_j> <= b_j + tol for every halfspace j."""
    return (points @ normals.T <= offsets[None, :] + tol).all(axis=1)


def warmup():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    pts = np.array([[0.5, 0.5], [2.0, 0.0]])
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    gauge_batch(pts, sq, np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
    segment_distance_batch(pts, sq, np.roll(sq, -1, axis=0))
    p3 = np.array([[0.2, 0.2, 2.0]])
    tri = (np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]),
           np.array([[0.0, 1.0, 0.0]]))
    triangle_distance_batch(p3, *tri)
