"""Synchronous multi-swarm coverage simulation with reciprocal avoidance.

Each step every agent, working from the same snapshot of positions:

1. tessellates its own swarm and computes its coverage velocity;
2. estimates the local wind from a biased, noisy measurement;
3. for every other agent builds the velocity obstacle, inflates the relative
   preferred velocity by both agents' error ellipsoids and derives a
   reciprocal half-space of permitted velocities;
4. picks the closest permitted velocity inside its speed ball and applies the
   control input that cancels the estimated wind.

Positions are then advanced under the true wind with an explicit Euler step.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .avoidance import build_vo, feasible_velocity, orca_halfspace, recovery_separation, separation_vector
from .coverage import CoverageWeights, VoronoiCell, cells_cost, check_positions, tessellate
from .errors import AlreadyInCollision, ValidationError
from .geom3 import DEFAULT_RESOLUTION, UNIFORM, ConvexPolytope, make_box, volume
from .uncertainty import Ellipsoid, MeasurementModel, ellipsoid_from_wind, measure_and_estimate, uniform_in_ball

WIND_KINDS = ("shear", "constant", "custom-grid")


@dataclass(frozen=True)
class WindField:
    kind: str = "shear"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in WIND_KINDS:
            raise ValidationError(f"unknown wind kind {self.kind!r}; expected one of {WIND_KINDS}")
        if self.kind == "constant" and "value" not in self.params:
            raise ValidationError("constant wind needs params.value")
        if self.kind == "custom-grid":
            for key in ("x", "y", "z", "values"):
                if key not in self.params:
                    raise ValidationError(f"custom-grid wind needs params.{key}")

    def _interpolator(self):
        from scipy.interpolate import RegularGridInterpolator

        axes = tuple(np.asarray(self.params[k], dtype=float) for k in ("x", "y", "z"))
        values = np.asarray(self.params["values"], dtype=float)
        return axes, RegularGridInterpolator(axes, values)


def wind_at(wind: WindField, position) -> np.ndarray:
    """True wind velocity (m/s) at ``position``."""
    x = np.asarray(position, dtype=float)
    if wind.kind == "shear":
        base = float(wind.params.get("base", 4.0))
        gradient = float(wind.params.get("gradient", 1.0))
        h = base - gradient * x[2]
        return np.array([h, h, 0.0])
    if wind.kind == "constant":
        return np.asarray(wind.params["value"], dtype=float).reshape(3).copy()
    axes, interp = wind._interpolator()
    q = np.array([min(max(x[d], axes[d][0]), axes[d][-1]) for d in range(3)])
    return np.asarray(interp(q[None, :])[0], dtype=float).reshape(3)


@dataclass(frozen=True)
class AgentSpec:
    position: tuple[float, float, float] | None = None
    radius: float = 0.2
    v_max: float = 5.0
    weights: CoverageWeights = CoverageWeights()
    bias_estimate: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # true sensor bias; when omitted the residual bias is drawn inside the bound
    bias: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class SwarmSpec:
    agents: tuple[AgentSpec, ...]
    # weights other swarms assume when estimating this swarm's gains
    published_weights: CoverageWeights = CoverageWeights()


@dataclass(frozen=True)
class SimConfig:
    region_min: tuple[float, float, float]
    region_max: tuple[float, float, float]
    swarms: tuple[SwarmSpec, ...]
    wind: WindField = WindField()
    tau: float = 1.0
    dt: float = 0.01
    duration: float = 5.0
    seed: int = 0
    quadrature: int = DEFAULT_RESOLUTION
    major_ratio: float = 0.15
    minor_ratio: float = 0.005
    alpha: float = 0.5
    responsibility: float = 0.5
    intra_swarm_orca: bool = True
    saturate_preferred: bool = True
    clamp_separation: bool = False
    random_initial: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    @property
    def region(self) -> ConvexPolytope:
        return make_box(self.region_min, self.region_max)

    @property
    def agents(self) -> list[AgentSpec]:
        return [a for s in self.swarms for a in s.agents]

    @property
    def swarm_ids(self) -> np.ndarray:
        return np.array([k for k, s in enumerate(self.swarms) for _ in s.agents], dtype=int)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def validate(self) -> None:
        lo, hi = np.asarray(self.region_min, float), np.asarray(self.region_max, float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise ValidationError("region.box must give min < max in every coordinate")
        if not self.swarms or any(len(s.agents) == 0 for s in self.swarms):
            raise ValidationError("every swarm needs at least one agent")
        if not (0.0 < self.dt <= self.tau and math.isfinite(self.tau)):
            raise ValidationError(f"need 0 < dt <= tau, got dt={self.dt}, tau={self.tau}")
        if not self.duration >= self.dt:
            raise ValidationError(f"duration {self.duration} shorter than one step {self.dt}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"uncertainty.alpha must lie in (0, 1), got {self.alpha}")
        if self.major_ratio < 0 or self.minor_ratio < 0:
            raise ValidationError("uncertainty ratios must be non-negative")
        if not 0.0 < self.responsibility <= 1.0:
            raise ValidationError("responsibility must lie in (0, 1]")
        if self.quadrature < 1 or self.workers < 1:
            raise ValidationError("quadrature and workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        for a in self.agents:
            if not (a.radius > 0 and a.v_max > 0):
                raise ValidationError("agent radius and v_max must be positive")
            if not self.random_initial and a.position is None:
                raise ValidationError("agent position is required unless random_initial is set")
        if not self.random_initial:
            region = self.region
            ids = self.swarm_ids
            pos = np.array([a.position for a in self.agents], dtype=float)
            try:
                for k in range(len(self.swarms)):
                    check_positions(pos[ids == k], region)
            except ValueError as exc:
                raise ValidationError(str(exc)) from exc


@dataclass(frozen=True)
class WorldState:
    step_index: int
    time: float
    positions: np.ndarray
    # residual-bias draw per agent, in unit-ball coordinates of its bound
    bias_unit: np.ndarray

    def __post_init__(self):
        for name in ("positions", "bias_unit"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass
class StepMetrics:
    time: float
    positions: np.ndarray
    cell_volumes: np.ndarray
    min_interswarm_distance: float
    # smallest (distance - r_i - r_j) over inter-swarm pairs
    min_interswarm_clearance: float
    coverage_cost: list[float]
    infeasible_agents: int = 0


def _bias_rng(seed: int, agent: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, agent, 0]))


def _noise_rng(seed: int, agent: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, agent, 1, step]))


def random_positions(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform positions in the region, every pair further apart than its radii."""
    agents = config.agents
    lo, hi = np.asarray(config.region_min, float), np.asarray(config.region_max, float)
    radii = np.array([a.radius for a in agents])
    out: list[np.ndarray] = []
    for i in range(len(agents)):
        for _ in range(100_000):
            # keep the whole safety sphere inside the region when it fits
            pad = np.minimum(radii[i], 0.25 * (hi - lo))
            p = lo + pad + rng.random(3) * (hi - lo - 2 * pad)
            if all(np.linalg.norm(p - q) > radii[i] + radii[j] + 1e-3 for j, q in enumerate(out)):
                out.append(p)
                break
        else:
            raise ValidationError("could not place agents without overlap")
    return np.array(out)


def init_world(config: SimConfig) -> WorldState:
    if config.random_initial:
        positions = random_positions(config, np.random.default_rng(np.random.SeedSequence([config.seed, 2**32 - 1])))
    else:
        positions = np.array([a.position for a in config.agents], dtype=float)
    bias_unit = np.array([uniform_in_ball(_bias_rng(config.seed, i)) for i in range(len(positions))])
    return WorldState(0, 0.0, positions, bias_unit)


def tessellate_swarms(positions: np.ndarray, config: SimConfig, region=None) -> list[VoronoiCell]:
    """One cell per agent, each from a tessellation of the agent's own swarm."""
    region = config.region if region is None else region
    ids = config.swarm_ids
    cells: list[VoronoiCell | None] = [None] * len(positions)
    for k in range(len(config.swarms)):
        members = np.flatnonzero(ids == k)
        for local, cell in zip(members, tessellate(positions[members], region, UNIFORM, config.quadrature)):
            cells[local] = VoronoiCell(int(local), cell.region, cell.mass, cell.centroid)
    return cells  # type: ignore[return-value]


def compute_metrics(world: WorldState, config: SimConfig, cells: Sequence[VoronoiCell] | None = None) -> StepMetrics:
    if cells is None:
        cells = tessellate_swarms(world.positions, config)
    ids = config.swarm_ids
    radii = np.array([a.radius for a in config.agents])
    x = world.positions
    min_d, min_clear = math.inf, math.inf
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if ids[i] != ids[j]:
                d = float(np.linalg.norm(x[i] - x[j]))
                min_d = min(min_d, d)
                min_clear = min(min_clear, d - radii[i] - radii[j])
    costs = []
    for k in range(len(config.swarms)):
        members = np.flatnonzero(ids == k)
        local = [VoronoiCell(n, cells[m].region, cells[m].mass, cells[m].centroid) for n, m in enumerate(members)]
        costs.append(cells_cost(x[members], local, UNIFORM, config.quadrature))
    return StepMetrics(
        time=world.time,
        positions=x.copy(),
        cell_volumes=np.array([volume(c.region) for c in cells]),
        min_interswarm_distance=min_d,
        min_interswarm_clearance=min_clear,
        coverage_cost=costs,
    )


@dataclass
class _Snapshot:
    positions: np.ndarray
    swarm_ids: np.ndarray
    radii: np.ndarray
    v_max: np.ndarray
    v_pref: np.ndarray  # what each agent aims for
    v_pref_seen: np.ndarray  # what other swarms estimate it aims for
    bounds: list[Ellipsoid]
    config: SimConfig


def _halfspaces(i: int, snap: _Snapshot, fallback: frozenset) -> list:
    cfg = snap.config
    out = []
    for j in range(len(snap.positions)):
        if j == i:
            continue
        same = snap.swarm_ids[i] == snap.swarm_ids[j]
        if same and not cfg.intra_swarm_orca:
            continue
        if i in fallback or j in fallback:
            v_i, v_j = np.zeros(3), np.zeros(3)
        else:
            v_i = snap.v_pref[i]
            v_j = snap.v_pref[j] if same else snap.v_pref_seen[j]
        rel_pref = v_i - v_j
        try:
            vo = build_vo(snap.positions[i], snap.positions[j], snap.radii[i], snap.radii[j], cfg.tau)
            w, n, _ = separation_vector(vo, rel_pref, snap.bounds[i], snap.bounds[j], cfg.clamp_separation)
        except AlreadyInCollision:
            w, n, _ = recovery_separation(
                snap.positions[j] - snap.positions[i],
                snap.radii[i] + snap.radii[j],
                cfg.dt,
                rel_pref,
                snap.bounds[i],
                snap.bounds[j],
            )
        out.append(orca_halfspace(v_i, w, n, cfg.responsibility))
    return out


def _decide(i: int, snap: _Snapshot, fallback: frozenset) -> tuple[np.ndarray, bool]:
    return feasible_velocity(_halfspaces(i, snap, fallback), snap.v_max[i], snap.v_pref[i])


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def choose_velocities(snap: _Snapshot) -> tuple[np.ndarray, np.ndarray]:
    """New velocity for every agent and whether its permitted set was non-empty.

    An agent with an empty set switches every pair it belongs to over to
    half-spaces built from zero preferred velocities. The switch is applied to
    both agents of the pair so the half-spaces stay reciprocal; it is repeated
    until no further agent becomes infeasible.
    """
    n = len(snap.positions)
    fallback: frozenset = frozenset()
    while True:
        results = _map(lambda i: _decide(i, snap, fallback), range(n), snap.config.workers)
        stuck = frozenset(i for i, (_, ok) in enumerate(results) if not ok)
        if stuck <= fallback:
            break
        fallback = fallback | stuck
    v_new = np.array([v for v, _ in results])
    feasible = np.array([ok for _, ok in results])
    return v_new, feasible


def _snapshot(world: WorldState, config: SimConfig, cells: Sequence[VoronoiCell]) -> _Snapshot:
    agents = config.agents
    ids = config.swarm_ids
    x = world.positions
    v_max = np.array([a.v_max for a in agents])
    v_pref = np.zeros_like(x)
    v_seen = np.zeros_like(x)
    for i, (a, c) in enumerate(zip(agents, cells)):
        # coverage law k (CM - x), k = M sqrt(s/r); the estimate uses published weights
        pull = c.centroid - x[i]
        v_pref[i] = c.mass * a.weights.gain_factor * pull
        v_seen[i] = c.mass * config.swarms[ids[i]].published_weights.gain_factor * pull
    if config.saturate_preferred:
        for arr in (v_pref, v_seen):
            speed = np.linalg.norm(arr, axis=1)
            over = speed > v_max
            arr[over] *= (v_max[over] / speed[over])[:, None]
    bounds = [ellipsoid_from_wind(wind_at(config.wind, p), config.major_ratio, config.minor_ratio) for p in x]
    for arr in (v_pref, v_seen):
        arr.flags.writeable = False
    return _Snapshot(x, ids, np.array([a.radius for a in agents]), v_max, v_pref, v_seen, bounds, config)


@dataclass
class StepResult:
    world: WorldState
    v_new: np.ndarray
    realized: np.ndarray
    feasible: np.ndarray


def advance(world: WorldState, config: SimConfig, cells: Sequence[VoronoiCell] | None = None) -> StepResult:
    if cells is None:
        cells = tessellate_swarms(world.positions, config)
    snap = _snapshot(world, config, cells)
    v_new, feasible = choose_velocities(snap)

    region = config.region
    agents = config.agents
    positions = np.empty_like(world.positions)
    realized = np.empty_like(world.positions)
    for i, a in enumerate(agents):
        x = world.positions[i]
        wind = wind_at(config.wind, x)
        bound = snap.bounds[i]
        model = MeasurementModel(a.bias, np.asarray(a.bias_estimate, float), config.major_ratio, config.minor_ratio, config.alpha)
        if model.bias is not None:
            delta_bias = model.bias - model.bias_estimate
        else:
            delta_bias = config.alpha * (bound.sqrt_shape @ world.bias_unit[i])
        noise = (1.0 - config.alpha) * (bound.sqrt_shape @ uniform_in_ball(_noise_rng(config.seed, i, world.step_index)))
        _, wind_estimate = measure_and_estimate(wind, model, delta_bias, noise)
        u = v_new[i] - wind_estimate
        realized[i] = u + wind
        positions[i] = region.closest_point(x + realized[i] * config.dt)

    nxt = WorldState(world.step_index + 1, (world.step_index + 1) * config.dt, positions, world.bias_unit)
    return StepResult(nxt, v_new, realized, feasible)


def step(world: WorldState, config: SimConfig) -> WorldState:
    return advance(world, config).world


def run(config: SimConfig, progress=None) -> tuple[list[StepMetrics], WorldState]:
    """Simulate ``config.duration`` seconds; metrics are recorded at t = 0 and after every step."""
    world = init_world(config)
    region = config.region
    trajectory = []
    cells = tessellate_swarms(world.positions, config, region)
    trajectory.append(compute_metrics(world, config, cells))
    for k in range(config.n_steps):
        result = advance(world, config, cells)
        world = result.world
        cells = tessellate_swarms(world.positions, config, region)
        metrics = compute_metrics(world, config, cells)
        metrics.infeasible_agents = int((~result.feasible).sum())
        trajectory.append(metrics)
        if progress is not None:
            progress(k + 1, config.n_steps)
    return trajectory, world


def with_overrides(config: SimConfig, **changes) -> SimConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
