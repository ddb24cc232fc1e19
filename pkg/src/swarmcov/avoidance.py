"""Reciprocal collision avoidance in velocity space with bounded measurement error.

The velocity obstacle of A with respect to B for horizon tau is the union of
the balls S((x_B - x_A)/t, (r_A + r_B)/t) for t in (0, tau]: a cone with apex
at the origin, truncated near the apex by its smallest ball. It is a solid of
revolution about x_B - x_A, so nearest-point queries reduce to the meridian
half-plane through the query point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _lp
from .errors import AlreadyInCollision
from .geom3 import HalfSpace
from .uncertainty import Ellipsoid, support

NUDGE = 1e-9
ACTIVE_TOL = 1e-9


@dataclass(frozen=True)
class VelocityObstacle:
    rel_position: np.ndarray  # x_B - x_A
    combined_radius: float  # r_A + r_B
    horizon: float  # tau

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.rel_position))

    @property
    def axis(self) -> np.ndarray:
        return self.rel_position / self.distance

    @property
    def cap_centre(self) -> np.ndarray:
        return self.rel_position / self.horizon

    @property
    def cap_radius(self) -> float:
        return self.combined_radius / self.horizon

    @property
    def sin_half_angle(self) -> float:
        return self.combined_radius / self.distance


@dataclass(frozen=True)
class BoundaryContact:
    point: np.ndarray
    normal: np.ndarray  # unit, pointing out of the obstacle
    facet: str  # "cap" or "cone"


def build_vo(x_a, x_b, r_a: float, r_b: float, tau: float) -> VelocityObstacle:
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ValueError(f"time horizon must be positive and finite, got {tau}")
    if r_a < 0 or r_b < 0:
        raise ValueError("radii must be non-negative")
    rel = np.asarray(x_b, dtype=float) - np.asarray(x_a, dtype=float)
    radius = float(r_a + r_b)
    dist = float(np.linalg.norm(rel))
    if dist <= radius:
        raise AlreadyInCollision(f"agents {dist:.6g} m apart with combined radius {radius:.6g} m")
    return VelocityObstacle(rel, radius, float(tau))


def vo_contains(vo: VelocityObstacle, v) -> bool:
    """True iff ||t v - dx|| <= R for some t in (0, tau]."""
    v = np.asarray(v, dtype=float)
    a = float(v @ v)
    if a == 0.0:
        return False
    b = float(v @ vo.rel_position)
    if b <= 0.0:
        return False
    c = float(vo.rel_position @ vo.rel_position) - vo.combined_radius**2
    disc = b * b - a * c
    if disc < 0.0:
        return False
    # smaller root of a t^2 - 2 b t + c, in the cancellation-free form
    t_enter = c / (b + math.sqrt(disc))
    return t_enter <= vo.horizon


def _perpendicular(axis: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to ``axis``; odd in ``axis`` so that the two agents
    of a pair (opposite axes) pick opposite directions."""
    sign = 1.0
    for c in axis:
        if c != 0.0:
            sign = 1.0 if c > 0.0 else -1.0
            break
    canon = sign * axis
    helper = np.array([0.0, 0.0, 1.0]) if abs(canon[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    p = helper - (helper @ canon) * canon
    return sign * p / np.linalg.norm(p)


def closest_boundary(vo: VelocityObstacle, v) -> BoundaryContact:
    """Nearest point of the obstacle boundary to ``v`` and the outward normal there."""
    v = np.asarray(v, dtype=float)
    e1 = vo.axis
    along = float(v @ e1)
    perp = v - along * e1
    perp = perp - float(perp @ e1) * e1
    perp_norm = float(np.linalg.norm(perp))
    e2 = perp / perp_norm if perp_norm > 1e-9 * (1.0 + abs(along)) else _perpendicular(e1)

    sin_t = vo.sin_half_angle
    cos_t = math.sqrt(max(1.0 - sin_t * sin_t, 0.0))
    centre, r = vo.cap_centre, vo.cap_radius

    # lateral surface: generator ray s*u for s beyond the tangency circle
    u = cos_t * e1 + sin_t * e2
    s_tangent = float(np.linalg.norm(centre)) * cos_t
    s = max(float(v @ u), s_tangent)
    cone_point = s * u
    cone_dist = float(np.linalg.norm(v - cone_point))

    rel = v - centre
    rel_norm = float(np.linalg.norm(rel))
    m = rel / rel_norm if rel_norm > 0.0 else -e1
    if -float(m @ e1) >= sin_t:
        cap_dist = abs(rel_norm - r)
        if cap_dist <= cone_dist:
            return BoundaryContact(centre + r * m, m, "cap")
    normal = -sin_t * e1 + cos_t * e2
    return BoundaryContact(cone_point, normal / np.linalg.norm(normal), "cone")


def separation_vector(
    vo: VelocityObstacle,
    v_pref_rel,
    eps_a: Ellipsoid,
    eps_b: Ellipsoid,
    clamp: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Translation w along the boundary normal n that places the error-inflated
    relative velocity set (v_pref_rel + eps_a + eps_b) on the safe side of the
    supporting plane at p, the boundary point nearest v_pref_rel.

    Returns (w, n, p). With ``clamp=True`` a set that is already clear of the
    plane gets w = 0 instead of being pulled back onto it.
    """
    v = np.asarray(v_pref_rel, dtype=float)
    contact = closest_boundary(vo, v)
    n, p = contact.normal, contact.point
    gamma = float(p @ n) - (float(v @ n) - support(eps_a, n) - support(eps_b, n))
    if clamp:
        gamma = max(gamma, 0.0)
    return gamma * n, n, p


def recovery_separation(
    rel_position, combined_radius: float, dt: float, v_pref_rel, eps_a: Ellipsoid, eps_b: Ellipsoid
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Separation for agents that already overlap.

    The obstacle is replaced by the ball S(dx/dt, R/dt): leaving it means the
    overlap is resolved within one step.
    """
    rel_position = np.asarray(rel_position, dtype=float)
    v = np.asarray(v_pref_rel, dtype=float)
    centre = rel_position / dt
    r = combined_radius / dt
    off = v - centre
    off_norm = float(np.linalg.norm(off))
    if off_norm > 0.0:
        n = off / off_norm
    else:
        d = float(np.linalg.norm(rel_position))
        n = -rel_position / d if d > 0.0 else np.array([0.0, 0.0, -1.0])
    p = centre + r * n
    gamma = float(p @ n) - (float(v @ n) - support(eps_a, n) - support(eps_b, n))
    return gamma * n, n, p


def orca_halfspace(v_pref_own, w, n, responsibility: float = 0.5) -> HalfSpace:
    """Half-space {v | (v - (v_pref_own + responsibility*w)).n > 0}.

    The other agent of the pair calls this with its own preferred velocity,
    -w and -n.
    """
    if not 0.0 < responsibility <= 1.0:
        raise ValueError(f"responsibility must lie in (0, 1], got {responsibility}")
    return HalfSpace(np.asarray(v_pref_own, dtype=float) + responsibility * np.asarray(w, dtype=float), n)


def _nudge(x: np.ndarray, normals: np.ndarray, offsets: np.ndarray, v_max: float) -> np.ndarray:
    if not len(normals):
        return x
    slack = normals @ x - offsets
    active = np.abs(slack) <= ACTIVE_TOL
    if not active.any():
        return x
    g = normals[active].sum(axis=0)
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return x
    moved = x + NUDGE * g / g_norm
    if np.linalg.norm(moved) > v_max:
        return x
    if np.any(normals @ moved - offsets < np.minimum(slack, 0.0)):
        return x
    return moved


def feasible_velocity(halfspaces: Sequence[HalfSpace], v_max: float, v_pref) -> tuple[np.ndarray, bool]:
    """Closest velocity to ``v_pref`` inside every half-space and the speed ball.

    When the intersection is empty, returns the velocity minimising the largest
    half-space violation inside the ball (ties broken towards ``v_pref``) and
    ``feasible=False``.
    """
    if not v_max > 0.0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    v_pref = np.asarray(v_pref, dtype=float)
    if halfspaces:
        normals = np.array([h.normal for h in halfspaces])
        offsets = np.einsum("ij,ij->i", normals, np.array([h.anchor for h in halfspaces]))
    else:
        normals, offsets = np.zeros((0, 3)), np.zeros(0)
    x = _lp.project(v_pref, normals, offsets, v_max)
    if x is None:
        x, _ = _lp.minimax(v_pref, normals, offsets, v_max)
        return x, False
    return _nudge(x, normals, offsets, v_max), True
