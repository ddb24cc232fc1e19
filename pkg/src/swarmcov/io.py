"""CSV and summary output for simulation runs."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .sim import SimConfig, StepMetrics

TRAJECTORY_HEADER = ["t", "agent_id", "swarm_id", "x", "y", "z", "cell_volume"]
REGION_TOL = 1e-9


def fmt(value: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(value), ".17g")


def metrics_header(n_swarms: int) -> list[str]:
    return ["t", "min_interswarm_distance"] + [f"coverage_cost_swarm_{k}" for k in range(n_swarms)]


def write_trajectory_csv(path: Path, trajectory: Sequence[StepMetrics], config: SimConfig) -> None:
    ids = config.swarm_ids
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRAJECTORY_HEADER)
        for m in trajectory:
            t = fmt(m.time)
            for i, (p, vol) in enumerate(zip(m.positions, m.cell_volumes)):
                out.writerow([t, i, int(ids[i]), fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(vol)])


def write_metrics_csv(path: Path, trajectory: Sequence[StepMetrics], config: SimConfig) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(metrics_header(len(config.swarms)))
        for m in trajectory:
            out.writerow([fmt(m.time), fmt(m.min_interswarm_distance)] + [fmt(c) for c in m.coverage_cost])


def max_volume_deviation(metrics: StepMetrics, config: SimConfig) -> float:
    """Largest relative gap between a cell volume and its swarm's equal share."""
    total = float(np.prod(np.asarray(config.region_max, float) - np.asarray(config.region_min, float)))
    ids = config.swarm_ids
    share = total / np.bincount(ids)[ids]
    return float(np.max(np.abs(metrics.cell_volumes - share) / share))


def invariant_violations(trajectory: Sequence[StepMetrics], config: SimConfig) -> list[str]:
    """Collisions between swarms and positions outside the region."""
    lo = np.asarray(config.region_min, float) - REGION_TOL
    hi = np.asarray(config.region_max, float) + REGION_TOL
    problems = []
    for m in trajectory:
        if m.min_interswarm_clearance <= 0.0:
            problems.append(f"t={m.time:.4f}: inter-swarm collision (clearance {m.min_interswarm_clearance:.3g} m)")
        if np.any(m.positions < lo) or np.any(m.positions > hi):
            problems.append(f"t={m.time:.4f}: agent outside the region")
    return problems


def run_summary(seed: int, trajectory: Sequence[StepMetrics], config: SimConfig, wall_time: float) -> dict:
    final = trajectory[-1]
    violations = invariant_violations(trajectory, config)
    min_d = min(m.min_interswarm_distance for m in trajectory)
    return {
        "seed": int(seed),
        "status": "ok" if not violations else "invariant-violation",
        "steps": len(trajectory) - 1,
        "final_time": float(final.time),
        "final_cell_volumes": [float(v) for v in final.cell_volumes],
        "max_volume_deviation_pct": 100.0 * max_volume_deviation(final, config),
        "min_interswarm_distance": None if math.isinf(min_d) else float(min_d),
        "min_interswarm_clearance": None if math.isinf(min_d) else float(min(m.min_interswarm_clearance for m in trajectory)),
        "infeasible_agent_steps": int(sum(m.infeasible_agents for m in trajectory)),
        "wall_time_s": round(float(wall_time), 3),
        "violations": violations[:20],
    }


def write_summary(path: Path, summary: dict) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(summary, fh, sort_keys=False)


def write_outputs(
    trajectory: Sequence[StepMetrics],
    config: SimConfig,
    out_dir: str | Path,
    seed: int,
    wall_time: float = 0.0,
    trajectory_csv: bool = True,
    metrics_csv: bool = True,
    summary: bool = True,
) -> dict:
    """Write the per-seed files into ``out_dir`` and return the run summary."""
    if not trajectory:
        raise ValueError("empty trajectory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if trajectory_csv:
        write_trajectory_csv(out / f"trajectory_seed{seed}.csv", trajectory, config)
    if metrics_csv:
        write_metrics_csv(out / f"metrics_seed{seed}.csv", trajectory, config)
    info = run_summary(seed, trajectory, config, wall_time)
    if summary:
        write_summary(out / f"summary_seed{seed}.yaml", info)
    return info
