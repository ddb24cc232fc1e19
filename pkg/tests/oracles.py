"""Reference computations used by the tests.

Each oracle reaches its answer by a different route than the library code:
brute-force sampling, grid search, convex programming or a transcription of
the classic reference algorithm.
"""
from __future__ import annotations

import math
from itertools import combinations

import numpy as np


# ---------------------------------------------------------------- polytopes


def random_clipped_box(rng, lo=(0.0, 0.0, 0.0), hi=(10.0, 10.0, 10.0), max_planes=6):
    """A box cut by 1..max_planes random planes, each through an interior point."""
    from swarmcov.geom3 import HalfSpace, clip, make_box, volume

    poly = make_box(lo, hi)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    for _ in range(rng.integers(1, max_planes + 1)):
        anchor = lo + rng.uniform(0.2, 0.8, size=3) * (hi - lo)
        cut = clip(poly, HalfSpace(anchor, rng.normal(size=3)))
        if not cut.is_empty and volume(cut) > 1e-3 * np.prod(hi - lo):
            poly = cut
    return poly


def inside_planes(points: np.ndarray, poly) -> np.ndarray:
    """Membership from the bounding planes alone (no use of the vertex list)."""
    return np.all(points @ poly.normals.T <= poly.offsets + 1e-12, axis=1)


def jittered_points(lo, hi, per_axis: int, rng) -> np.ndarray:
    """One uniform point in each cell of a per_axis^3 grid over the box."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    idx = np.stack(np.meshgrid(*[np.arange(per_axis)] * 3, indexing="ij"), -1).reshape(-1, 3)
    return lo + (idx + rng.random(idx.shape)) * (hi - lo) / per_axis


def monte_carlo_moments(poly, rng, per_axis: int = 100):
    """Volume and centroid from per_axis^3 stratified samples, with the standard
    errors of plain i.i.d. sampling at the same sample count."""
    lo, hi = poly.bounds()
    box = float(np.prod(hi - lo))
    pts = jittered_points(lo, hi, per_axis, rng)
    inside = inside_planes(pts, poly)
    n = len(pts)
    frac = inside.mean()
    vol = box * frac
    vol_se = box * math.sqrt(frac * (1 - frac) / n)
    q = pts[inside]
    centroid = q.mean(axis=0)
    centroid_se = q.std(axis=0, ddof=1) / math.sqrt(len(q))
    return vol, vol_se, centroid, centroid_se


def nearest_owner_grid(positions: np.ndarray, lo, hi, per_axis: int) -> np.ndarray:
    """Cell volumes by assigning grid midpoints to their nearest position."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    h = (hi - lo) / per_axis
    axes = [lo[d] + (np.arange(per_axis) + 0.5) * h[d] for d in range(3)]
    counts = np.zeros(len(positions))
    # slab by slab to bound memory
    for x in axes[0]:
        yy, zz = np.meshgrid(axes[1], axes[2], indexing="ij")
        pts = np.stack([np.full(yy.size, x), yy.ravel(), zz.ravel()], 1)
        d2 = ((pts[:, None, :] - positions[None]) ** 2).sum(-1)
        counts += np.bincount(d2.argmin(1), minlength=len(positions))
    return counts * float(np.prod(h))


# ---------------------------------------------------------- velocity obstacle


def vo_contains_grid(rel_position, radius, tau, v, samples=200_001) -> bool:
    """Membership by scanning t over (0, tau]."""
    t = np.linspace(tau / samples, tau, samples)
    d = t[:, None] * np.asarray(v, float)[None] - np.asarray(rel_position, float)[None]
    return bool(np.min(np.einsum("ij,ij->i", d, d)) <= radius * radius)


def _meridian(rel_position, v):
    """Orthonormal (e1 along the axis, e2 toward v) and v's coordinates."""
    e1 = np.asarray(rel_position, float) / np.linalg.norm(rel_position)
    v = np.asarray(v, float)
    perp = v - (v @ e1) * e1
    if np.linalg.norm(perp) < 1e-12:
        helper = np.array([0.0, 0.0, 1.0]) if abs(e1[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        perp = helper - (helper @ e1) * e1
    e2 = perp / np.linalg.norm(perp)
    return e1, e2, np.array([v @ e1, v @ e2])


def boundary_distance_support(rel_position, radius, tau, v, samples=1_000_000):
    """Distance from v to the obstacle boundary through the support function.

    The obstacle is convex with h(n) = (n.dx + R)/tau when n.dx + R <= 0 and
    +inf otherwise, so the distance to its boundary is
    max_n (n.v - h(n)) outside and min_n (h(n) - n.v) inside. By rotational
    symmetry the optimal n lies in the plane of dx and v.
    Returns (distance, outward normal at the nearest boundary point).
    """
    e1, e2, _ = _meridian(rel_position, v)
    d = float(np.linalg.norm(rel_position))
    ang = np.linspace(-math.pi, math.pi, samples, endpoint=False)
    # the cone-face normals sit on the edge of the support function's domain,
    # where a sampled minimum is only first-order accurate
    edge = math.acos(-radius / d)
    ang = np.append(ang, [edge, -edge])
    n = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
    numer = n @ np.asarray(rel_position, float) + radius
    # the exact edge normals can round to a tiny positive numerator
    ok = numer <= 1e-12 * d
    h = np.minimum(numer[ok], 0.0) / tau
    gap = n[ok] @ np.asarray(v, float) - h
    inside = np.all(gap <= 0)
    if inside:
        k = np.argmax(gap)  # the least negative: min of h - n.v
        return float(-gap[k]), n[ok][k]
    k = np.argmax(gap)
    return float(gap[k]), n[ok][k]


def vo_boundary_curve(rel_position, radius, tau, rays=1_000_000, reach=200.0):
    """Boundary of the obstacle in its meridian half-plane, sampled by casting
    rays from the cap centre and bisecting an independent membership test.

    Returns points (along, across) with across >= 0; rays that leave the
    sampled window without meeting the boundary are dropped.
    """
    d = float(np.linalg.norm(rel_position))
    centre = np.array([d / tau, 0.0])
    ang = np.linspace(0.0, math.pi, rays)
    u = np.stack([np.cos(ang), np.sin(ang)], 1)

    def member(q):
        # min over t in (0, tau] of |t q - dx|^2, dx = (d, 0)
        qq = np.einsum("ij,ij->i", q, q)
        t = np.clip(q[:, 0] * d / np.maximum(qq, 1e-300), 1e-300, tau)
        diff = t[:, None] * q - np.array([d, 0.0])
        return np.einsum("ij,ij->i", diff, diff) <= radius * radius

    lo = np.zeros(rays)
    hi = np.full(rays, reach)
    bounded = ~member(centre + reach * u)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        m = member(centre + mid[:, None] * u)
        lo = np.where(m, mid, lo)
        hi = np.where(m, hi, mid)
    pts = centre + (0.5 * (lo + hi))[:, None] * u
    return pts, bounded


class SampledBoundary:
    """Polyline through the ray-cast boundary points, with nearest-segment
    queries in the meridian half-plane."""

    def __init__(self, rel_position, radius, tau, rays=1_000_000, reach=200.0):
        from scipy.spatial import cKDTree

        pts, bounded = vo_boundary_curve(rel_position, radius, tau, rays, reach)
        self.points = pts[bounded]
        self.tree = cKDTree(self.points)

    def distance(self, v2, neighbours=8) -> float:
        _, idx = self.tree.query(v2, k=neighbours)
        last = len(self.points) - 1
        best = math.inf
        for i in idx:
            for j in (i - 1, i + 1):
                if 0 <= j <= last:
                    a, b = self.points[min(i, j)], self.points[max(i, j)]
                    ab = b - a
                    t = min(max((v2 - a) @ ab / max(ab @ ab, 1e-300), 0.0), 1.0)
                    best = min(best, float(np.linalg.norm(a + t * ab - v2)))
        return best


def orca_push_reference(rel_position, radius, tau, v_rel, digits=50):
    """Shortest vector u from v_rel to the obstacle boundary and the outward
    normal there, transcribed from the three-dimensional reference
    implementation of reciprocal collision avoidance (non-colliding case).

    The cone branch solves a quadratic whose coefficients cancel badly in
    double precision (errors near 1e-8), so the formulas run in ``digits``
    decimal digits.
    """
    import mpmath

    with mpmath.workdps(digits):
        rel = mpmath.matrix([mpmath.mpf(float(x)) for x in rel_position])
        v = mpmath.matrix([mpmath.mpf(float(x)) for x in v_rel])
        radius = mpmath.mpf(float(radius))

        def dot(a, b):
            return sum(a[i] * b[i] for i in range(3))

        def cross(a, b):
            return mpmath.matrix([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])

        dist_sq = dot(rel, rel)
        r_sq = radius * radius
        inv_tau = 1 / mpmath.mpf(float(tau))
        w = v - inv_tau * rel
        w_len_sq = dot(w, w)
        wdot = dot(w, rel)
        if wdot < 0 and wdot * wdot > r_sq * w_len_sq:
            # project on the cut-off sphere
            w_len = mpmath.sqrt(w_len_sq)
            unit = w / w_len
            u = (radius * inv_tau - w_len) * unit
        else:
            # project on the cone
            a = dist_sq
            b = dot(rel, v)
            cr = cross(rel, v)
            c = dot(v, v) - dot(cr, cr) / (dist_sq - r_sq)
            t = (b + mpmath.sqrt(b * b - a * c)) / a
            ww = v - t * rel
            ww_len = mpmath.sqrt(dot(ww, ww))
            unit = ww / ww_len
            u = (radius * t - ww_len) * unit
        return np.array([float(x) for x in u]), np.array([float(x) for x in unit])


# ------------------------------------------------------- velocity selection


def _frame(first, second=None):
    e1 = first / np.linalg.norm(first)
    if second is None:
        second = np.array([1.0, 0.0, 0.0]) if abs(e1[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e2 = second - (second @ e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.stack([e1, e2, np.cross(e1, e2)], 1)


def halfspace_grid_argmin(normals, offsets, v_max, target, per_axis=5, finest=1e-10, max_scans=3000, seed=0):
    """Closest feasible point to ``target`` by refining grid search.

    Feasible means normals @ v >= offsets and |v| <= v_max. A 41^3 grid locates
    the feasible set; after that each scan evaluates per_axis^3 stencils around
    the incumbent, one randomly rotated and others aligned with the normals and
    edges of nearly tight planes. Every stencil point is also tried after
    retraction onto the ball and onto each nearly tight plane's disk, so the
    search can follow curved faces and edges. The window halves once the
    incumbent stops moving.
    """
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(seed)
    normals = np.asarray(normals, float).reshape(-1, 3)
    offsets = np.asarray(offsets, float)
    target = np.asarray(target, float)

    def feasible(p):
        return (np.einsum("ij,ij->i", p, p) <= v_max * v_max) & np.all(p @ normals.T >= offsets, axis=1)

    def nearest(p):
        return p[np.argmin(np.einsum("ij,ij->i", p - target, p - target))]

    def to_ball(p):
        r = np.linalg.norm(p, axis=1, keepdims=True)
        return p * np.minimum(1.0, v_max / np.maximum(r, 1e-300))

    def to_disk(p, n, b):
        q = p - (p @ n - b)[:, None] * n
        centre = b * n
        rho = math.sqrt(max(v_max * v_max - b * b, 0.0))
        d = q - centre
        r = np.linalg.norm(d, axis=1, keepdims=True)
        return centre + d * np.minimum(1.0, rho / np.maximum(r, 1e-300))

    if feasible(target[None])[0]:
        return target
    g = np.linspace(-v_max, v_max, 41)
    coarse = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    best = None
    for _ in range(50):
        pts = coarse @ Rotation.random(random_state=rng).as_matrix().T
        ok = feasible(pts)
        if ok.any():
            best = nearest(pts[ok])
            break
    if best is None:
        return None

    g = np.linspace(-1.0, 1.0, per_axis)
    stencil = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    half = v_max / 20
    for _ in range(max_scans):
        tight = [k for k in range(len(normals)) if normals[k] @ best - offsets[k] <= 2 * half]
        frames = [Rotation.random(random_state=rng).as_matrix()]
        for a, b in combinations(tight, 2):
            edge = np.cross(normals[a], normals[b])
            if np.linalg.norm(edge) > 1e-9:
                frames.append(_frame(edge, normals[a]))
        frames += [_frame(normals[a]) for a in tight]
        raw = np.vstack([best + half * stencil @ f.T for f in frames])
        pts = np.vstack([raw, to_ball(raw)] + [to_disk(raw, normals[k], offsets[k]) for k in tight])
        new = nearest(np.vstack([pts[feasible(pts)], best]))
        moved = np.linalg.norm(new - best) > 0.3 * half
        best = new
        if not moved:
            half *= 0.5
            if half < finest:
                break
    return best


def halfspace_enumeration_argmin(normals, offsets, v_max, target, tol=1e-9):
    """Exact closest feasible point by enumerating candidate active sets.

    The minimiser is the projection of ``target`` onto the affine hull of its
    active planes, or onto that hull intersected with the speed sphere. Every
    set of up to three planes, with and without the sphere, is tried in
    closed form; the best feasible candidate wins.
    """
    normals = np.asarray(normals, float).reshape(-1, 3)
    offsets = np.asarray(offsets, float)
    target = np.asarray(target, float)

    def feasible(x):
        return x @ x <= v_max * v_max * (1 + tol) and (not len(normals) or np.all(normals @ x >= offsets - tol))

    def onto_affine(a, b, p):
        # nearest point to p on {x | a x = b}
        gram = a @ a.T
        if np.linalg.matrix_rank(gram, tol=1e-12) < len(a):
            return None
        return p - a.T @ np.linalg.solve(gram, a @ p - b)

    cands = [target]
    if np.linalg.norm(target) > 0:
        cands.append(target * v_max / np.linalg.norm(target))
    for size in (1, 2, 3):
        for s in combinations(range(len(normals)), size):
            a, b = normals[list(s)], offsets[list(s)]
            x = onto_affine(a, b, target)
            if x is None:
                continue
            cands.append(x)
            if size < 3:
                centre = onto_affine(a, b, np.zeros(3))
                rho2 = v_max * v_max - centre @ centre
                off = x - centre
                if rho2 >= 0 and np.linalg.norm(off) > 0:
                    cands.append(centre + math.sqrt(rho2) * off / np.linalg.norm(off))
    best = None
    for x in cands:
        if feasible(x) and (best is None or np.linalg.norm(x - target) < np.linalg.norm(best - target)):
            best = x
    return best


# ---------------------------------------------------------------- sum sets


def sumset_distance_cvx(terms, offset, point) -> float:
    """Euclidean distance from ``point`` to offset + sum of ellipsoids (SOCP)."""
    import cvxpy as cp

    us = [cp.Variable(3) for _ in terms]
    expr = np.asarray(offset, float)
    cons = []
    for u, e in zip(us, terms):
        expr = expr + e.sqrt_shape @ u
        cons.append(cp.norm(u, 2) <= 1)
    prob = cp.Problem(cp.Minimize(cp.norm(expr - np.asarray(point, float), 2)), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def sumset_distance_pg(roots: np.ndarray, offsets: np.ndarray, points: np.ndarray, iters=3000) -> np.ndarray:
    """Batched distance to offset + sum_k L_k B by accelerated projected gradient.

    roots: (N, K, 3, 3) square roots of the shape matrices.
    """
    n, k = roots.shape[:2]
    L = roots.transpose(0, 2, 1, 3).reshape(n, 3, 3 * k)  # (N, 3, 3K)
    target = points - offsets
    lip = np.maximum(np.linalg.norm(L, ord=2, axis=(1, 2)) ** 2, 1e-12)
    u = np.zeros((n, 3 * k))
    y = u.copy()
    mom = 1.0

    def proj(z):
        z = z.reshape(n, k, 3)
        r = np.linalg.norm(z, axis=2, keepdims=True)
        return (z / np.maximum(r, 1.0)).reshape(n, 3 * k)

    for _ in range(iters):
        resid = np.einsum("nij,nj->ni", L, y) - target
        grad = np.einsum("nji,nj->ni", L, resid)
        u_next = proj(y - grad / lip[:, None])
        mom_next = 0.5 * (1 + math.sqrt(1 + 4 * mom * mom))
        y = u_next + ((mom - 1) / mom_next) * (u_next - u)
        u, mom = u_next, mom_next
    return np.linalg.norm(np.einsum("nij,nj->ni", L, u) - target, axis=1)


# ------------------------------------------------------------ random cases


def random_vo(rng):
    """(rel_position, combined radius, tau) of a non-colliding pair."""
    d = rng.uniform(0.5, 8.0)
    radius = rng.uniform(0.05, 0.95) * d
    tau = rng.uniform(0.2, 3.0)
    axis = rng.normal(size=3)
    return d * axis / np.linalg.norm(axis), radius, tau


def random_query(rng, rel, radius, tau):
    """A velocity spread over the cap, the cone and the outside."""
    return rel / tau * rng.uniform(-0.5, 2.5) + rng.normal(size=3) * radius / tau * rng.uniform(0, 3)


def random_vo_case(rng):
    rel, radius, tau = random_vo(rng)
    return rel, radius, tau, random_query(rng, rel, radius, tau)


def random_halfspace_instance(rng, max_planes=7, v_max=5.0):
    """Half-spaces with a common interior point inside the speed ball, and a
    target anywhere in a box around the ball."""
    interior = rng.normal(size=3)
    interior *= rng.uniform(0, 0.9 * v_max) / np.linalg.norm(interior)
    k = rng.integers(1, max_planes + 1)
    normals = rng.normal(size=(k, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = normals @ interior - rng.uniform(0, 2, size=k)
    target = rng.uniform(-8, 8, size=3)
    return normals, offsets, target
