"""Disturbance-measurement errors and the ellipsoids that bound them.

An ellipsoid is stored through its shape matrix S, the set being
{S^(1/2) u : ||u|| <= 1}. Unlike the inverse form z^T P z <= 1 this also
covers the flat and single-point sets that appear when the wind dies down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import NonUnitDirection

UNIT_TOL = 1e-9
CONTAINS_SLACK = 1e-9


@dataclass(frozen=True)
class Ellipsoid:
    shape: np.ndarray
    _sqrt: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        s = np.array(self.shape, dtype=float).reshape(3, 3)
        if not np.allclose(s, s.T, rtol=0.0, atol=1e-12):
            raise ValueError("ellipsoid shape matrix must be symmetric")
        s = 0.5 * (s + s.T)
        vals, vecs = np.linalg.eigh(s)
        if vals.min() < -1e-12:
            raise ValueError(f"ellipsoid shape matrix has negative eigenvalue {vals.min()}")
        vals = np.clip(vals, 0.0, None)
        root = (vecs * np.sqrt(vals)) @ vecs.T
        s.flags.writeable = False
        root.flags.writeable = False
        object.__setattr__(self, "shape", s)
        object.__setattr__(self, "_sqrt", root)

    @classmethod
    def point(cls) -> "Ellipsoid":
        return cls(np.zeros((3, 3)))

    @classmethod
    def ball(cls, radius: float = 1.0) -> "Ellipsoid":
        return cls(np.eye(3) * radius**2)

    @classmethod
    def from_axes(cls, axes, semi_axes) -> "Ellipsoid":
        """Orthonormal principal ``axes`` (rows) with the given semi-axis lengths."""
        axes = np.asarray(axes, dtype=float).reshape(3, 3)
        lengths = np.asarray(semi_axes, dtype=float)
        return cls(axes.T @ np.diag(lengths**2) @ axes)

    @property
    def sqrt_shape(self) -> np.ndarray:
        return self._sqrt

    def scaled(self, factor: float) -> "Ellipsoid":
        return Ellipsoid(self.shape * factor**2)

    def is_point(self) -> bool:
        return not np.any(self.shape)

    def contains(self, z, tol: float = 1e-12) -> bool:
        """Exact membership; works for degenerate shapes through the pseudo-inverse."""
        z = np.asarray(z, dtype=float)
        if self.is_point():
            return bool(np.linalg.norm(z) <= tol)
        u, *_ = np.linalg.lstsq(self._sqrt, z, rcond=1e-12)
        if np.linalg.norm(self._sqrt @ u - z) > max(tol, 1e-12 * (1 + np.linalg.norm(z))):
            return False
        return bool(u @ u <= 1.0 + tol)


def _check_unit(direction) -> np.ndarray:
    n = np.asarray(direction, dtype=float).reshape(3)
    if abs(math.sqrt(float(n @ n)) - 1.0) > UNIT_TOL:
        raise NonUnitDirection(f"direction {n} is not a unit vector")
    return n


def ellipsoid_from_wind(wind, major_ratio: float = 0.15, minor_ratio: float = 0.005) -> Ellipsoid:
    """Error bound whose semi-major axis (major_ratio * |wind|) lies along the wind
    and whose two semi-minor axes have length minor_ratio * |wind|."""
    if major_ratio < 0 or minor_ratio < 0:
        raise ValueError("axis ratios must be non-negative")
    wind = np.asarray(wind, dtype=float).reshape(3)
    speed = float(np.linalg.norm(wind))
    if speed == 0.0:
        return Ellipsoid.point()
    d = wind / speed
    # S = b^2 I + (a^2 - b^2) d d^T, independent of the choice of minor axes
    a2 = (major_ratio * speed) ** 2
    b2 = (minor_ratio * speed) ** 2
    return Ellipsoid(b2 * np.eye(3) + (a2 - b2) * np.outer(d, d))


def support(e: Ellipsoid, direction) -> float:
    n = _check_unit(direction)
    return math.sqrt(max(float(n @ e.shape @ n), 0.0))


@dataclass(frozen=True)
class SumSet:
    """offset + (terms[0] + terms[1] + ...) in the Minkowski sense."""

    terms: tuple[Ellipsoid, ...] = ()
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        off = np.array(self.offset, dtype=float).reshape(3)
        off.flags.writeable = False
        object.__setattr__(self, "offset", off)


def sumset_support(s: SumSet, direction) -> float:
    n = _check_unit(direction)
    return float(n @ s.offset) + sum(support(t, n) for t in s.terms)


@lru_cache(maxsize=16)
def fibonacci_sphere(count: int) -> np.ndarray:
    """``count`` near-uniform unit vectors (rounded up to even), closed under
    negation so that membership tests are symmetric about the centre."""
    half = (count + 1) // 2
    k = np.arange(half) + 0.5
    z = 1.0 - 2.0 * k / half
    rho = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    pts = np.vstack([pts, -pts])
    pts.flags.writeable = False
    return pts


def sumset_contains(s: SumSet, point, directions: int = 256) -> bool:
    """One-sided membership certificate.

    ``False`` is conclusive: some direction separates ``point`` from the set.
    ``True`` means no separating direction was found among ``directions``
    Fibonacci-sphere directions plus the direction from the offset to ``point``.
    """
    if directions < 100:
        raise ValueError("at least 100 directions are required")
    p = np.asarray(point, dtype=float).reshape(3)
    dirs = fibonacci_sphere(directions)
    rel = p - s.offset
    dist = float(np.linalg.norm(rel))
    if dist > 0.0:
        dirs = np.vstack([dirs, rel / dist])
    h = np.zeros(len(dirs))
    for t in s.terms:
        h = h + np.sqrt(np.clip(np.einsum("ij,jk,ik->i", dirs, t.shape, dirs), 0.0, None))
    return bool(np.all(dirs @ rel <= h + CONTAINS_SLACK))


@dataclass
class MeasurementModel:
    """Sensor model for one agent: measured = true + bias + noise.

    The bias estimate is known to the agent; the residual bias (bias minus its
    estimate) and the noise together stay inside the bound ellipsoid.
    """

    bias: np.ndarray | None = None
    bias_estimate: np.ndarray = field(default_factory=lambda: np.zeros(3))
    major_ratio: float = 0.15
    minor_ratio: float = 0.005
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        self.bias_estimate = np.asarray(self.bias_estimate, dtype=float).reshape(3)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=float).reshape(3)

    def bound(self, wind) -> Ellipsoid:
        return ellipsoid_from_wind(wind, self.major_ratio, self.minor_ratio)


def uniform_in_ball(rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(3)
    norm = float(np.linalg.norm(g))
    while norm == 0.0:
        g = rng.standard_normal(3)
        norm = float(np.linalg.norm(g))
    return g / norm * rng.random() ** (1.0 / 3.0)


def sample_disturbance_error(bound: Ellipsoid, alpha: float, rng: np.random.Generator, phase: str) -> np.ndarray:
    """Uniform draw from alpha * bound (``phase="bias"``) or (1 - alpha) * bound
    (``phase="noise"``). Any bias draw plus any noise draw lies in ``bound``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if phase == "bias":
        scale = alpha
    elif phase == "noise":
        scale = 1.0 - alpha
    else:
        raise ValueError(f"unknown phase {phase!r}")
    return scale * (bound.sqrt_shape @ uniform_in_ball(rng))


def measure_and_estimate(true_wind, model: MeasurementModel, delta_bias, noise) -> tuple[np.ndarray, np.ndarray]:
    """Return (measured wind, bias-corrected estimate)."""
    true_wind = np.asarray(true_wind, dtype=float)
    bias = model.bias_estimate + np.asarray(delta_bias, dtype=float)
    measured = true_wind + bias + np.asarray(noise, dtype=float)
    return measured, measured - model.bias_estimate


def minkowski_sum(terms: Sequence[Ellipsoid], offset=(0.0, 0.0, 0.0)) -> SumSet:
    return SumSet(tuple(terms), np.asarray(offset, dtype=float))
