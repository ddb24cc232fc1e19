"""Command-line entry point: ``swarmcov run | verify | print-config``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from . import verify as verify_mod
from .config import load_config, serialize_config
from .errors import SwarmCovError
from .io import write_outputs
from .sim import SimConfig, run

log = logging.getLogger("swarmcov")


@dataclass
class RunManifest:
    config_path: str
    seeds: list[int]
    out_dir: Path
    trajectory: bool = True
    metrics: bool = True
    summary: bool = True
    overrides: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")


def parse_seeds(text: str) -> list[int]:
    """``"1..10"`` (inclusive), ``"3,5,8"`` or a single integer."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    return seeds


def resolve_config(path: str, overrides: dict) -> SimConfig:
    cfg = load_config(path)
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **changes) if changes else cfg


def _run_one(args: tuple[str, dict, int, Path, bool, bool, bool]) -> dict:
    path, overrides, seed, out_dir, traj, metrics, summary = args
    cfg = replace(resolve_config(path, overrides), seed=seed)
    start = time.perf_counter()
    trajectory, _ = run(cfg)
    elapsed = time.perf_counter() - start
    return write_outputs(trajectory, cfg, out_dir, seed, elapsed, traj, metrics, summary)


def execute(manifest: RunManifest) -> int:
    """Run every seed, write outputs and an aggregate summary; returns the exit status."""
    # fail early on a bad config before any worker starts
    resolve_config(manifest.config_path, manifest.overrides)
    manifest.out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (manifest.config_path, manifest.overrides, s, manifest.out_dir, manifest.trajectory, manifest.metrics, manifest.summary)
        for s in manifest.seeds
    ]
    if manifest.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    failed = 0
    for info in results:
        min_d = info["min_interswarm_distance"]
        min_txt = "n/a" if min_d is None else f"{min_d:.6f} m"
        print(
            f"seed {info['seed']}: max cell-volume deviation {info['max_volume_deviation_pct']:.5f}%, "
            f"min inter-swarm distance {min_txt}, {info['wall_time_s']:.2f} s, {info['status']}"
        )
        if info["status"] != "ok":
            failed += 1
            for v in info["violations"]:
                print(f"  {v}", file=sys.stderr)
    if manifest.summary:
        dists = [r["min_interswarm_distance"] for r in results if r["min_interswarm_distance"] is not None]
        aggregate = {
            "config": str(manifest.config_path),
            "seeds": list(manifest.seeds),
            "runs_ok": len(results) - failed,
            "runs_failed": failed,
            "worst_volume_deviation_pct": max(r["max_volume_deviation_pct"] for r in results),
            "min_interswarm_distance": min(dists) if dists else None,
            "runs": results,
        }
        with open(manifest.out_dir / "summary.yaml", "w") as fh:
            yaml.safe_dump(aggregate, fh, sort_keys=False)
    return 1 if failed else 0


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "yes", "1"):
        return True
    if text.lower() in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError("expected on or off")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="config file, or the name of a bundled one (paper_sec4.cfg)")
    p.add_argument("--dt", type=float, help="integration step T (s)")
    p.add_argument("--tau", type=float, help="avoidance horizon (s)")
    p.add_argument("--duration", type=float, help="simulated time (s)")
    p.add_argument("--quadrature", type=int, help="grid resolution for non-uniform densities")
    p.add_argument("--intra-swarm-orca", type=_on_off, metavar="on|off", help="avoid members of the own swarm as well")
    p.add_argument("--workers", type=int, help="threads for the per-agent decision phase")


def _overrides(args) -> dict:
    return {
        "dt": args.dt,
        "tau": args.tau,
        "duration": args.duration,
        "quadrature": args.quadrature,
        "intra_swarm_orca": args.intra_swarm_orca,
        "workers": args.workers,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmcov", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one or more seeds and write CSV output")
    _add_sim_flags(p_run)
    p_run.add_argument("--seeds", type=parse_seeds, help="a..b (inclusive) or comma list; default: the config's seed")
    p_run.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="seeds simulated in parallel")
    p_run.add_argument("--no-trajectory", action="store_true")
    p_run.add_argument("--no-metrics", action="store_true")

    p_ver = sub.add_parser("verify", help="Monte-Carlo certification of the pairwise guarantees")
    p_ver.add_argument("--theorems", action="store_true", help="run the containment and avoidance suites (default)")
    p_ver.add_argument("--samples", type=int, default=10_000)
    p_ver.add_argument("--trajectories", type=int, help="integrated pairs (default samples/10)")
    p_ver.add_argument("--seed", type=int, default=0)

    p_cfg = sub.add_parser("print-config", help="print the resolved configuration")
    _add_sim_flags(p_cfg)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            seeds = args.seeds or [load_config(args.config).seed]
            manifest = RunManifest(
                config_path=args.config,
                seeds=seeds,
                out_dir=args.out,
                trajectory=not args.no_trajectory,
                metrics=not args.no_metrics,
                overrides=_overrides(args),
                jobs=args.jobs,
            )
            return execute(manifest)
        if args.command == "verify":
            if args.samples < 1:
                parser.error("--samples must be positive")
            results = [verify_mod.certify_containment(args.samples, args.seed)]
            results += verify_mod.certify_avoidance(args.samples, args.trajectories, args.seed)
            for r in results:
                print(r.line())
                for d in r.details:
                    print(f"  {d}", file=sys.stderr)
            return 0 if all(r.ok for r in results) else 1
        cfg = resolve_config(args.config, _overrides(args))
        sys.stdout.write(serialize_config(cfg))
        return 0
    except FileNotFoundError as exc:
        print(f"swarmcov: cannot read {exc.filename}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (SwarmCovError, ValueError, OSError) as exc:
        print(f"swarmcov: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
