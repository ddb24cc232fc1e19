"""Convex polytopes in 3D: half-space clipping, volume, centroid and moments.

A polytope keeps both its boundary (vertices plus faces as index cycles,
counter-clockwise seen from outside) and its bounding planes. Clipping walks
every face polygon against the cutting plane (Sutherland-Hodgman), then closes
the hole with a cap face built from the points lying on the plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _lp
from .errors import DegenerateBox, ZeroMass

PLANE_TOL = 1e-9  # membership slack for point queries
# clipping and vertex merging use this times the polytope's coordinate scale;
# looser values leave slivers that show up in second moments
REL_TOL = 1e-13
DEFAULT_RESOLUTION = 64


def as_vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector {arr}")
    return arr


@dataclass(frozen=True)
class HalfSpace:
    """Open half-space {v | (v - anchor).normal > 0}.

    Geometry code (clipping, polytope membership) uses the closed version.
    """

    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        anchor = as_vec3(self.anchor)
        normal = as_vec3(self.normal)
        norm = float(np.linalg.norm(normal))
        if norm == 0.0:
            raise ValueError("half-space normal must be non-zero")
        if abs(norm - 1.0) > 1e-12:
            normal = normal / norm
        anchor.flags.writeable = False
        normal.flags.writeable = False
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "normal", normal)

    @property
    def offset(self) -> float:
        return float(self.normal @ self.anchor)

    def margin(self, v) -> float:
        return float((np.asarray(v, dtype=float) - self.anchor) @ self.normal)

    def contains(self, v) -> bool:
        return self.margin(v) > 0.0

    def contains_closed(self, v, tol: float = 0.0) -> bool:
        return self.margin(v) >= -tol

    def flipped(self) -> "HalfSpace":
        return HalfSpace(self.anchor, -self.normal)


@dataclass(frozen=True)
class DensityField:
    """Importance density phi(q). ``func`` maps an (N, 3) array to (N,)."""

    func: Callable[[np.ndarray], np.ndarray] | None = None
    kind: str = "uniform"

    @classmethod
    def uniform(cls) -> "DensityField":
        return cls(None, "uniform")

    @classmethod
    def general(cls, func) -> "DensityField":
        return cls(func, "general")

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def __call__(self, q) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if self.func is None:
            return np.ones(len(q))
        return np.asarray(self.func(q), dtype=float).reshape(len(q))


UNIFORM = DensityField.uniform()


@dataclass(frozen=True)
class ConvexPolytope:
    vertices: np.ndarray
    faces: tuple[tuple[int, ...], ...]
    # outward unit normal and offset per face: inside <=> normals @ q <= offsets
    normals: np.ndarray
    offsets: np.ndarray
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in ("vertices", "normals", "offsets"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls) -> "ConvexPolytope":
        return cls(np.zeros((0, 3)), (), np.zeros((0, 3)), np.zeros(0))

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    @property
    def bounding_planes(self) -> list[HalfSpace]:
        """Bounding planes as half-spaces whose normal points inside."""
        return [HalfSpace(n * b, -n) for n, b in zip(self.normals, self.offsets)]

    @property
    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for f in self.faces:
            for a, b in zip(f, f[1:] + f[:1]):
                out.add((min(a, b), max(a, b)))
        return out

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.faces)

    def contains(self, q, tol: float = PLANE_TOL):
        """Closed membership. Accepts a single point or an (N, 3) array."""
        q = np.asarray(q, dtype=float)
        if self.is_empty:
            return False if q.ndim == 1 else np.zeros(len(q), dtype=bool)
        slack = q @ self.normals.T - self.offsets
        return np.all(slack <= tol, axis=-1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def closest_point(self, q) -> np.ndarray:
        q = as_vec3(q)
        if self.contains(q, 0.0):
            return q
        x = _lp.project(q, -self.normals, -self.offsets)
        if x is None:
            raise ValueError("cannot project onto an empty polytope")
        return x

    def _tets(self):
        """Fan tetrahedra from the vertex mean: (apex, a, b, c) arrays and signed volumes."""
        if "tets" not in self._cache:
            apex = self.vertices.mean(axis=0)
            tris = [(f[0], f[k], f[k + 1]) for f in self.faces for k in range(1, len(f) - 1)]
            idx = np.array(tris, dtype=int).reshape(-1, 3)
            a, b, c = (self.vertices[idx[:, k]] for k in range(3))
            vol = np.einsum("ij,ij->i", a - apex, np.cross(b - apex, c - apex)) / 6.0
            self._cache["tets"] = (apex, a, b, c, vol)
        return self._cache["tets"]


def make_box(min_corner, max_corner) -> ConvexPolytope:
    lo, hi = as_vec3(min_corner), as_vec3(max_corner)
    if np.any(hi - lo <= 0.0):
        raise DegenerateBox(f"box extents must be positive, got {hi - lo}")
    verts = np.array([[(lo, hi)[(k >> d) & 1][d] for d in range(3)] for k in range(8)])
    # vertex k has bit d set when coordinate d is at the max corner
    faces = (
        (0, 4, 6, 2),  # x = lo
        (1, 3, 7, 5),  # x = hi
        (0, 1, 5, 4),  # y = lo
        (2, 6, 7, 3),  # y = hi
        (0, 2, 3, 1),  # z = lo
        (4, 5, 7, 6),  # z = hi
    )
    normals = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], float)
    offsets = np.array([-lo[0], hi[0], -lo[1], hi[1], -lo[2], hi[2]])
    return ConvexPolytope(verts, faces, normals, offsets)


def _order_cap(points: np.ndarray, ids: list[int], outward: np.ndarray) -> tuple[int, ...]:
    centre = points[ids].mean(axis=0)
    helper = np.array([1.0, 0.0, 0.0]) if abs(outward[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(outward, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(outward, e1)
    rel = points[ids] - centre
    angles = np.arctan2(rel @ e2, rel @ e1)
    return tuple(ids[k] for k in np.argsort(angles, kind="stable"))


def _scale_tol(points: np.ndarray) -> float:
    return REL_TOL * (1.0 + float(np.abs(points).max()))


def _compact(points: np.ndarray, faces, normals, offsets, tol: float) -> ConvexPolytope:
    """Merge near-coincident vertices, drop unused ones and degenerate faces."""
    used = sorted({i for f in faces for i in f})
    remap: dict[int, int] = {}
    kept: list[np.ndarray] = []
    for i in used:
        p = points[i]
        for j, q in enumerate(kept):
            if np.max(np.abs(p - q)) <= tol:
                remap[i] = j
                break
        else:
            remap[i] = len(kept)
            kept.append(p)

    new_faces, new_normals, new_offsets = [], [], []
    for f, n, b in zip(faces, normals, offsets):
        cyc: list[int] = []
        for i in f:
            j = remap[i]
            if not cyc or cyc[-1] != j:
                cyc.append(j)
        while len(cyc) > 1 and cyc[0] == cyc[-1]:
            cyc.pop()
        if len(set(cyc)) >= 3:
            new_faces.append(tuple(cyc))
            new_normals.append(n)
            new_offsets.append(b)
    if len(new_faces) < 4:
        return ConvexPolytope.empty()
    return ConvexPolytope(np.array(kept), tuple(new_faces), np.array(new_normals), np.array(new_offsets))


def clip(poly: ConvexPolytope, keep_side: HalfSpace) -> ConvexPolytope:
    """Intersect ``poly`` with the closed half-space {(v - anchor).normal >= 0}."""
    if poly.is_empty:
        return poly
    s = (poly.vertices - keep_side.anchor) @ keep_side.normal
    tol = _scale_tol(poly.vertices)
    if s.max() <= tol:
        return ConvexPolytope.empty()
    if s.min() >= -tol:
        return poly

    points = list(poly.vertices)
    cut: dict[tuple[int, int], int] = {}
    on_plane: set[int] = set()

    def crossing(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in cut:
            p, q = key
            t = s[p] / (s[p] - s[q])
            points.append(poly.vertices[p] + t * (poly.vertices[q] - poly.vertices[p]))
            cut[key] = len(points) - 1
        return cut[key]

    faces, normals, offsets = [], [], []
    for f, n, b in zip(poly.faces, poly.normals, poly.offsets):
        out = []
        for a, nxt in zip(f, f[1:] + f[:1]):
            sa, sb = s[a], s[nxt]
            if sa >= -tol:
                out.append(a)
                if sa <= tol:
                    on_plane.add(a)
            if (sa > tol and sb < -tol) or (sa < -tol and sb > tol):
                k = crossing(a, nxt)
                out.append(k)
                on_plane.add(k)
        if len(out) >= 3:
            faces.append(tuple(out))
            normals.append(n)
            offsets.append(b)

    pts = np.array(points)
    if len(on_plane) >= 3:
        outward = -keep_side.normal
        faces.append(_order_cap(pts, sorted(on_plane), outward))
        normals.append(outward)
        offsets.append(float(outward @ keep_side.anchor))
    return _compact(pts, faces, normals, offsets, tol)


def volume(poly: ConvexPolytope) -> float:
    if poly.is_empty:
        return 0.0
    return float(abs(poly._tets()[4].sum()))


def _uniform_moments(poly: ConvexPolytope):
    apex, a, b, c, vol = poly._tets()
    total = vol.sum()
    centroids = (apex + a + b + c) / 4.0
    return total, (vol[:, None] * centroids).sum(axis=0) / total


def second_moment(poly: ConvexPolytope, about) -> float:
    """Exact integral of ||q - about||^2 over the polytope (unit density)."""
    if poly.is_empty:
        return 0.0
    about = as_vec3(about)
    apex, a, b, c, vol = poly._tets()
    corners = [np.broadcast_to(apex - about, a.shape), a - about, b - about, c - about]
    total = sum(corners)
    sq = sum(np.einsum("ij,ij->i", p, p) for p in corners) + np.einsum("ij,ij->i", total, total)
    return float(np.sum(vol * sq) / 20.0)


def _grid(poly: ConvexPolytope, resolution: int):
    """Midpoint-rule nodes inside the polytope and the cell volume."""
    lo, hi = poly.bounds()
    h = (hi - lo) / resolution
    axes = [lo[d] + (np.arange(resolution) + 0.5) * h[d] for d in range(3)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return g[poly.contains(g, 0.0)], float(np.prod(h))


def mass_and_centroid(
    poly: ConvexPolytope, density: DensityField = UNIFORM, resolution: int = DEFAULT_RESOLUTION
) -> tuple[float, np.ndarray]:
    """Mass (integral of phi) and centre of mass of a polytope.

    Uniform density is integrated exactly; any other density uses a midpoint
    grid of ``resolution``^3 nodes over the bounding box.
    """
    if poly.is_empty:
        raise ZeroMass("empty polytope has no mass")
    if density.is_uniform:
        mass, centroid = _uniform_moments(poly)
    else:
        nodes, dv = _grid(poly, resolution)
        w = density(nodes) * dv
        mass = float(w.sum())
        centroid = (w[:, None] * nodes).sum(axis=0) / mass if mass > 0 else np.zeros(3)
    if not mass > 1e-300:
        raise ZeroMass(f"mass {mass} is not positive")
    return float(mass), np.asarray(centroid, dtype=float)


def weighted_second_moment(
    poly: ConvexPolytope, about, density: DensityField = UNIFORM, resolution: int = DEFAULT_RESOLUTION
) -> float:
    """Integral of ||q - about||^2 phi(q); exact for uniform density."""
    if poly.is_empty:
        return 0.0
    if density.is_uniform:
        return second_moment(poly, about)
    nodes, dv = _grid(poly, resolution)
    d = nodes - as_vec3(about)
    return float(np.sum(density(nodes) * np.einsum("ij,ij->i", d, d)) * dv)


def clip_all(poly: ConvexPolytope, planes: Sequence[HalfSpace]) -> ConvexPolytope:
    for h in planes:
        poly = clip(poly, h)
        if poly.is_empty:
            break
    return poly


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = math.sqrt(float(v @ v))
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return v / n
