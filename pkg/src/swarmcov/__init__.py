"""Multi-swarm 3D coverage control with reciprocal collision avoidance under
bounded wind-measurement error."""

from .config import load_config, paper_config, parse_config, serialize_config
from .sim import SimConfig, StepMetrics, WorldState, run, step

__all__ = [
    "SimConfig",
    "StepMetrics",
    "WorldState",
    "load_config",
    "paper_config",
    "parse_config",
    "run",
    "serialize_config",
    "step",
]
__version__ = "0.1.0"
