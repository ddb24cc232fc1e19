"""Exact Euclidean projection onto {x : a_i.x >= b_i} (optionally intersected
with a ball centred at the origin) in three dimensions.

Constraints are added one at a time. If the running optimum violates the
next constraint, the new optimum lies on that constraint's plane, so the
problem drops to two dimensions on the plane, and from there to one
dimension on the line where two planes meet. Every sub-solution is the exact
closest point, so the result is the exact projection.
"""
import math

import numpy as np

VIOLATION_TOL = 1e-12


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _solve_line(normals, offsets, i, j, radius, target):
    """Closest point to ``target`` on plane i ∩ plane j under constraints < j."""
    ai, aj = normals[i], normals[j]
    d = _cross(ai, aj)
    dn = math.sqrt(_dot(d, d))
    if dn < 1e-14:
        return None
    d = (d[0] / dn, d[1] / dn, d[2] / dn)
    # point of the line closest to the origin lies in span(ai, aj)
    gii, gij, gjj = _dot(ai, ai), _dot(ai, aj), _dot(aj, aj)
    det = gii * gjj - gij * gij
    bi, bj = offsets[i], offsets[j]
    alpha = (bi * gjj - bj * gij) / det
    beta = (bj * gii - bi * gij) / det
    x0 = tuple(alpha * ai[k] + beta * aj[k] for k in range(3))

    if math.isinf(radius):
        lo, hi = -math.inf, math.inf
    else:
        disc = radius * radius - _dot(x0, x0)
        if disc < 0.0:
            return None
        half = math.sqrt(disc)
        lo, hi = -half, half

    for k in range(j):
        if k == i:
            continue
        ak = normals[k]
        num = offsets[k] - _dot(ak, x0)
        den = _dot(ak, d)
        if abs(den) < 1e-14:
            if num > VIOLATION_TOL:
                return None
            continue
        bound = num / den
        if den > 0.0:
            lo = max(lo, bound)
        else:
            hi = min(hi, bound)
    if lo > hi + VIOLATION_TOL:
        return None

    s = (target[0] - x0[0]) * d[0] + (target[1] - x0[1]) * d[1] + (target[2] - x0[2]) * d[2]
    s = min(max(s, lo), hi)
    return (x0[0] + s * d[0], x0[1] + s * d[1], x0[2] + s * d[2])


def _solve_plane(normals, offsets, i, radius, target):
    """Closest point to ``target`` on plane i under constraints < i."""
    ai, bi = normals[i], offsets[i]
    excess = _dot(ai, target) - bi
    x = (target[0] - excess * ai[0], target[1] - excess * ai[1], target[2] - excess * ai[2])
    if not math.isinf(radius):
        c0 = (bi * ai[0], bi * ai[1], bi * ai[2])
        rho2 = radius * radius - bi * bi
        if rho2 < 0.0:
            return None
        if _dot(x, x) > radius * radius:
            rel = (x[0] - c0[0], x[1] - c0[1], x[2] - c0[2])
            scale = math.sqrt(rho2) / math.sqrt(_dot(rel, rel))
            x = (c0[0] + scale * rel[0], c0[1] + scale * rel[1], c0[2] + scale * rel[2])

    for j in range(i):
        if _dot(normals[j], x) - offsets[j] < -VIOLATION_TOL:
            x = _solve_line(normals, offsets, i, j, radius, target)
            if x is None:
                return None
    return x


def project(target, normals, offsets, radius=math.inf):
    """Project ``target`` onto the closed feasible set.

    Args:
        target: point to project, length-3 sequence.
        normals: (m, 3) unit constraint normals ``a_i``.
        offsets: (m,) right-hand sides ``b_i``.
        radius: radius of the origin-centred ball, ``inf`` for none.

    Returns:
        The projection as a numpy array, or ``None`` when the set is empty.
    """
    normals = [tuple(float(c) for c in row) for row in np.asarray(normals, dtype=float).reshape(-1, 3)]
    offsets = [float(b) for b in np.asarray(offsets, dtype=float).reshape(-1)]
    t = tuple(float(c) for c in target)

    x = t
    if not math.isinf(radius):
        n = math.sqrt(_dot(t, t))
        if n > radius:
            x = (t[0] * radius / n, t[1] * radius / n, t[2] * radius / n)

    for i in range(len(normals)):
        if _dot(normals[i], x) - offsets[i] < -VIOLATION_TOL:
            x = _solve_plane(normals, offsets, i, radius, t)
            if x is None:
                return None
    return np.array(x)


def minimax(target, normals, offsets, radius, iterations=80):
    """Smallest uniform relaxation t of all constraints that makes the set
    non-empty, found by bisection; returns (point, t) where point is the
    projection of ``target`` onto the relaxed set."""
    offsets = np.asarray(offsets, dtype=float)
    lo = 0.0
    hi = max(float(np.max(offsets)), 0.0) + 1e-12 if offsets.size else 0.0
    best = project(target, normals, offsets - hi, radius)
    if best is None:
        # x = 0 satisfies every constraint relaxed by max(b); guard against rounding
        hi = hi * 2.0 + 1e-9
        best = project(target, normals, offsets - hi, radius)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        x = project(target, normals, offsets - mid, radius)
        if x is None:
            lo = mid
        else:
            hi, best = mid, x
        if hi - lo < 1e-13:
            break
    return best, hi
