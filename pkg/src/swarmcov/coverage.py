"""Per-swarm Voronoi tessellation and the energy-weighted coverage control law."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DuplicatePositions, NonPositiveMass, PositionOutsideRegion
from .geom3 import (
    DEFAULT_RESOLUTION,
    UNIFORM,
    ConvexPolytope,
    DensityField,
    HalfSpace,
    clip,
    mass_and_centroid,
    weighted_second_moment,
)

DUPLICATE_TOL = 1e-9


@dataclass(frozen=True)
class CoverageWeights:
    s: float = 1.0  # coverage weight
    r: float = 1.0  # energy weight

    def __post_init__(self):
        if not self.s >= 0.0:
            raise ValueError(f"coverage weight s must be >= 0, got {self.s}")
        if not self.r > 0.0:
            raise ValueError(f"energy weight r must be > 0, got {self.r}")

    @property
    def gain_factor(self) -> float:
        return math.sqrt(self.s / self.r)


@dataclass(frozen=True)
class VoronoiCell:
    owner: int
    region: ConvexPolytope
    mass: float
    centroid: np.ndarray


def check_positions(positions: np.ndarray, region: ConvexPolytope) -> None:
    positions = np.asarray(positions, dtype=float)
    for i, p in enumerate(positions):
        if not region.contains(p):
            raise PositionOutsideRegion(f"agent {i} at {p} lies outside the region")
    if len(positions) > 1:
        diff = positions[:, None, :] - positions[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= DUPLICATE_TOL:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise DuplicatePositions(f"agents {i} and {j} share position {positions[i]}")


def bisector(own, other) -> HalfSpace:
    """Closed half-space of points at least as close to ``own`` as to ``other``."""
    own = np.asarray(own, dtype=float)
    other = np.asarray(other, dtype=float)
    return HalfSpace(0.5 * (own + other), own - other)


def _cell(positions: np.ndarray, index: int, region: ConvexPolytope) -> ConvexPolytope:
    cell = region
    own = positions[index]
    for j, other in enumerate(positions):
        if j != index:
            cell = clip(cell, bisector(own, other))
    return cell


def voronoi_cell(positions, index: int, region: ConvexPolytope) -> ConvexPolytope:
    """Part of ``region`` closer to ``positions[index]`` than to any other position.

    Bisector planes are applied in index order, so the result is reproducible.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if not 0 <= index < len(positions):
        raise IndexError(f"agent index {index} out of range for {len(positions)} positions")
    check_positions(positions, region)
    return _cell(positions, index, region)


def tessellate(
    positions,
    region: ConvexPolytope,
    density: DensityField = UNIFORM,
    resolution: int = DEFAULT_RESOLUTION,
) -> list[VoronoiCell]:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    check_positions(positions, region)
    cells = []
    for i in range(len(positions)):
        poly = _cell(positions, i, region)
        mass, centroid = mass_and_centroid(poly, density, resolution)
        cells.append(VoronoiCell(i, poly, mass, centroid))
    return cells


def preferred_velocity(x, cell_mass: float, cell_centroid, weights: CoverageWeights) -> np.ndarray:
    """Coverage velocity k (CM - x) with gain k = M sqrt(s / r). Not saturated."""
    if not cell_mass > 0.0:
        raise NonPositiveMass(f"cell mass must be positive, got {cell_mass}")
    gain = cell_mass * weights.gain_factor
    return gain * (np.asarray(cell_centroid, dtype=float) - np.asarray(x, dtype=float))


def cells_cost(positions, cells: Sequence[VoronoiCell], density=UNIFORM, resolution=DEFAULT_RESOLUTION) -> float:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    return float(
        sum(weighted_second_moment(c.region, positions[c.owner], density, resolution) for c in cells)
    )


def coverage_cost(
    positions,
    region: ConvexPolytope,
    density: DensityField = UNIFORM,
    resolution: int = DEFAULT_RESOLUTION,
) -> float:
    """Sum over agents of the integral of ||x_i - q||^2 phi(q) over each agent's cell."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    check_positions(positions, region)
    return float(
        sum(
            weighted_second_moment(_cell(positions, i, region), positions[i], density, resolution)
            for i in range(len(positions))
        )
    )
