"""Monte-Carlo certification of the two pairwise guarantees.

* containment: with control u = v_pref - v_hat, the realised relative velocity
  of two agents lies in v_pref_rel + eps_A + eps_B;
* avoidance: any velocities chosen from the two reciprocal half-spaces, after
  any admissible measurement errors, give a relative velocity outside the
  velocity obstacle, so the pair stays separated for the whole horizon.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .avoidance import build_vo, orca_halfspace, separation_vector, vo_contains
from .uncertainty import (
    Ellipsoid,
    MeasurementModel,
    SumSet,
    ellipsoid_from_wind,
    measure_and_estimate,
    minkowski_sum,
    sumset_contains,
)

SUBSTEP = 1e-3


@dataclass
class SuiteResult:
    name: str
    cases: int
    violations: int
    details: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        state = "PASS" if self.ok else "FAIL"
        return f"[{state}] {self.name}: {self.violations} violations in {self.cases} cases"


def random_ellipsoid(rng: np.random.Generator) -> Ellipsoid:
    """Half wind-derived bounds (some at zero wind), half general ellipsoids."""
    kind = rng.random()
    if kind < 0.05:
        return Ellipsoid.point()
    if kind < 0.55:
        wind = rng.normal(size=3) * rng.uniform(0.0, 4.0)
        return ellipsoid_from_wind(wind, 0.15, 0.005)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return Ellipsoid.from_axes(q.T, rng.uniform(0.0, 1.0, size=3))


def _unit(rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=3)
    return g / np.linalg.norm(g)


def sample_in(e: Ellipsoid, rng: np.random.Generator, towards=None) -> np.ndarray:
    """A point of ``e``: uniform inside, on the surface, or the support point
    along ``towards`` (the worst case for a half-space test)."""
    mode = rng.integers(3)
    if mode == 2 and towards is not None:
        h = float(np.sqrt(max(towards @ e.shape @ towards, 0.0)))
        return e.shape @ towards / h if h > 0 else np.zeros(3)
    u = _unit(rng)
    if mode == 0:
        u = u * rng.random() ** (1.0 / 3.0)
    return e.sqrt_shape @ u


def containment_case(rng: np.random.Generator) -> tuple[SumSet, np.ndarray]:
    """One pair run through measure / estimate / control; returns the sum set
    v_pref_rel + eps_A + eps_B and the realised relative velocity."""
    eps = [random_ellipsoid(rng), random_ellipsoid(rng)]
    v_pref = rng.uniform(-6, 6, size=(2, 3))
    realised = []
    for k in range(2):
        wind = rng.uniform(-5, 5, size=3)
        model = MeasurementModel(bias_estimate=rng.uniform(-1, 1, size=3))
        # split the total error xi into a fixed-bias part and noise
        xi = sample_in(eps[k], rng, _unit(rng))
        alpha = rng.uniform(0.05, 0.95)
        _, estimate = measure_and_estimate(wind, model, alpha * xi, (1 - alpha) * xi)
        u = v_pref[k] - estimate
        realised.append(u + wind)
    return minkowski_sum(eps, v_pref[0] - v_pref[1]), realised[0] - realised[1]


def certify_containment(samples: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    details = []
    for case in range(samples):
        s, rel = containment_case(rng)
        if not sumset_contains(s, rel):
            bad += 1
            details.append(f"case {case}: {rel} outside sum set")
    return SuiteResult("containment of realised relative velocity", samples, bad, details[:10])


@dataclass
class PairScenario:
    x_a: np.ndarray
    x_b: np.ndarray
    r_a: float
    r_b: float
    tau: float
    eps_a: Ellipsoid
    eps_b: Ellipsoid
    v_a: np.ndarray  # chosen (commanded) velocities
    v_b: np.ndarray
    xi_a: np.ndarray  # realised errors
    xi_b: np.ndarray

    @property
    def realised_a(self) -> np.ndarray:
        return self.v_a - self.xi_a

    @property
    def realised_b(self) -> np.ndarray:
        return self.v_b - self.xi_b


def _pick_in_halfspace(h, rng: np.random.Generator) -> np.ndarray:
    """Point strictly inside an open half-space, sometimes hugging its boundary."""
    depth = 10.0 ** rng.uniform(-9, 0.5)
    tangent = rng.normal(size=3) * rng.uniform(0, 4)
    tangent -= (tangent @ h.normal) * h.normal
    return h.anchor + depth * h.normal + tangent


def random_pair(rng: np.random.Generator) -> PairScenario:
    r_a, r_b = rng.uniform(0.05, 0.5, size=2)
    radius = r_a + r_b
    tau = rng.uniform(0.2, 3.0)
    d = _unit(rng)
    gap = radius * (1.0 + 10.0 ** rng.uniform(-4, 1.3))
    x_a = rng.uniform(-5, 5, size=3)
    x_b = x_a + gap * d
    eps_a, eps_b = random_ellipsoid(rng), random_ellipsoid(rng)

    # preferred relative velocity: half the time aimed into the obstacle
    v_pref_a = rng.uniform(-5, 5, size=3)
    if rng.random() < 0.5:
        target = (x_b - x_a) / rng.uniform(0.3, 1.0) / tau + rng.normal(size=3) * radius / tau
        v_pref_b = v_pref_a - target
    else:
        v_pref_b = rng.uniform(-5, 5, size=3)

    # each agent derives its half-space on its own
    vo_ab = build_vo(x_a, x_b, r_a, r_b, tau)
    w_a, n_a, _ = separation_vector(vo_ab, v_pref_a - v_pref_b, eps_a, eps_b)
    vo_ba = build_vo(x_b, x_a, r_b, r_a, tau)
    w_b, n_b, _ = separation_vector(vo_ba, v_pref_b - v_pref_a, eps_b, eps_a)
    h_a = orca_halfspace(v_pref_a, w_a, n_a)
    h_b = orca_halfspace(v_pref_b, w_b, n_b)

    v_a, v_b = _pick_in_halfspace(h_a, rng), _pick_in_halfspace(h_b, rng)
    xi_a = sample_in(eps_a, rng, n_a)
    xi_b = sample_in(eps_b, rng, -n_a)
    return PairScenario(x_a, x_b, r_a, r_b, tau, eps_a, eps_b, v_a, v_b, xi_a, xi_b)


def pair_separated(s: PairScenario, substep: float = SUBSTEP) -> bool:
    """Integrate both agents at their realised velocities over the horizon."""
    steps = int(np.ceil(s.tau / substep))
    t = np.minimum(np.arange(steps + 1) * substep, s.tau)[:, None]
    gap = (s.x_a + t * s.realised_a) - (s.x_b + t * s.realised_b)
    return bool(np.all(np.linalg.norm(gap, axis=1) > s.r_a + s.r_b))


def certify_avoidance(samples: int, trajectories: int | None = None, seed: int = 0) -> tuple[SuiteResult, SuiteResult]:
    rng = np.random.default_rng(seed)
    trajectories = samples // 10 if trajectories is None else trajectories
    bad_vo = bad_traj = 0
    details_vo: list[str] = []
    details_traj: list[str] = []
    for case in range(samples):
        s = random_pair(rng)
        vo = build_vo(s.x_a, s.x_b, s.r_a, s.r_b, s.tau)
        if vo_contains(vo, s.realised_a - s.realised_b):
            bad_vo += 1
            details_vo.append(f"case {case}: realised relative velocity inside the obstacle")
        if case < trajectories and not pair_separated(s):
            bad_traj += 1
            details_traj.append(f"case {case}: separation lost within the horizon")
    return (
        SuiteResult("realised relative velocity outside the obstacle", samples, bad_vo, details_vo[:10]),
        SuiteResult("integrated pair trajectories stay separated", min(trajectories, samples), bad_traj, details_traj[:10]),
    )


def run_all(samples: int, seed: int = 0) -> list[SuiteResult]:
    return [certify_containment(samples, seed), *certify_avoidance(samples, seed=seed)]
