"""YAML configuration: parsing with line-aware errors, validation and serialisation."""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .coverage import CoverageWeights
from .errors import ParseError, ValidationError
from .sim import AgentSpec, SimConfig, SwarmSpec, WindField

TOP_KEYS = {
    "region", "swarms", "wind", "tau", "dt", "duration", "seed", "quadrature",
    "uncertainty", "avoidance", "initial_positions", "defaults", "workers",
}
AGENT_KEYS = {"position", "radius", "v_max", "weights", "bias_estimate", "bias"}
SWARM_KEYS = {"agents", "published_weights"}
UNCERTAINTY_KEYS = {"major_ratio", "minor_ratio", "alpha"}
AVOIDANCE_KEYS = {"responsibility", "intra_swarm_orca", "saturate_preferred", "clamp_separation"}
DEFAULTS_KEYS = {"radius", "v_max", "weights", "bias_estimate"}

BUNDLED = {"paper_sec4.cfg"}


class _Mapping(dict):
    lines: dict


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that remembers the source line of every mapping key."""

    def construct_mapping(self, node, deep=False):
        mapping = _Mapping(super().construct_mapping(node, deep=deep))
        mapping.lines = {}
        for key_node, _ in node.value:
            mapping.lines[self.construct_object(key_node)] = key_node.start_mark.line + 1
        return mapping

    def _construct_map(self, node):
        # the stock constructor copies into a plain dict and drops the lines
        return self.construct_mapping(node, deep=True)


_LineLoader.add_constructor("tag:yaml.org,2002:map", _LineLoader._construct_map)


def _line(mapping, key):
    return getattr(mapping, "lines", {}).get(key)


def _check_keys(mapping, allowed: set[str], where: str) -> None:
    if not isinstance(mapping, dict):
        raise ParseError(f"{where} must be a mapping", key=where)
    for key in mapping:
        if key not in allowed:
            raise ParseError(f"unknown key in {where}", line=_line(mapping, key), key=key)


def _vec(value, key, mapping) -> tuple[float, float, float]:
    try:
        out = tuple(float(c) for c in value)
    except (TypeError, ValueError):
        out = ()
    if len(out) != 3:
        raise ParseError("expected a list of three numbers", line=_line(mapping, key), key=key)
    return out  # type: ignore[return-value]


def _num(mapping, key, default, kind=float):
    if key not in mapping:
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", line=_line(mapping, key), key=key)
    if kind is int and float(value) != int(value):
        raise ParseError(f"expected an integer, got {value!r}", line=_line(mapping, key), key=key)
    return kind(value)


def _flag(mapping, key, default: bool) -> bool:
    if key not in mapping:
        return default
    value = mapping[key]
    if not isinstance(value, bool):
        raise ParseError(f"expected true/false, got {value!r}", line=_line(mapping, key), key=key)
    return value


def _weights(mapping, key, default: CoverageWeights) -> CoverageWeights:
    if key not in mapping:
        return default
    node = mapping[key]
    _check_keys(node, {"s", "r"}, key)
    try:
        return CoverageWeights(_num(node, "s", default.s), _num(node, "r", default.r))
    except ValueError as exc:
        raise ValidationError(f"{key}: {exc}") from exc


def parse_config(text: str) -> SimConfig:
    """Build a validated :class:`SimConfig` from YAML text.

    Raises:
        ParseError: malformed YAML, unknown keys or wrongly typed values.
        ValidationError: well-formed input that violates a constraint.
    """
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], line=mark.line + 1 if mark else None) from exc
    if not isinstance(doc, dict):
        raise ParseError("configuration must be a mapping at the top level")
    _check_keys(doc, TOP_KEYS, "top level")

    for key in ("region", "swarms"):
        if key not in doc:
            raise ParseError("missing required key", key=key)
    region = doc["region"]
    _check_keys(region, {"box"}, "region")
    if "box" not in region:
        raise ParseError("missing required key", line=_line(doc, "region"), key="region.box")
    box = region["box"]
    _check_keys(box, {"min", "max"}, "region.box")
    if "min" not in box or "max" not in box:
        raise ParseError("region.box needs min and max", line=_line(region, "box"), key="region.box")
    lo, hi = _vec(box["min"], "min", box), _vec(box["max"], "max", box)

    defaults = doc.get("defaults", {})
    _check_keys(defaults, DEFAULTS_KEYS, "defaults")
    d_radius = _num(defaults, "radius", 0.2)
    d_vmax = _num(defaults, "v_max", 5.0)
    d_weights = _weights(defaults, "weights", CoverageWeights())
    d_bias_est = _vec(defaults["bias_estimate"], "bias_estimate", defaults) if "bias_estimate" in defaults else (0.0, 0.0, 0.0)

    if not isinstance(doc["swarms"], list) or not doc["swarms"]:
        raise ParseError("swarms must be a non-empty list", line=_line(doc, "swarms"), key="swarms")
    swarms = []
    for s_node in doc["swarms"]:
        _check_keys(s_node, SWARM_KEYS, "swarm")
        agents_node = s_node.get("agents")
        if not isinstance(agents_node, list) or not agents_node:
            raise ParseError("swarm needs a non-empty agents list", key="agents")
        agents = []
        for a in agents_node:
            _check_keys(a, AGENT_KEYS, "agent")
            agents.append(
                AgentSpec(
                    position=_vec(a["position"], "position", a) if "position" in a else None,
                    radius=_num(a, "radius", d_radius),
                    v_max=_num(a, "v_max", d_vmax),
                    weights=_weights(a, "weights", d_weights),
                    bias_estimate=_vec(a["bias_estimate"], "bias_estimate", a) if "bias_estimate" in a else d_bias_est,
                    bias=_vec(a["bias"], "bias", a) if "bias" in a else None,
                )
            )
        swarms.append(SwarmSpec(tuple(agents), _weights(s_node, "published_weights", d_weights)))

    wind_node = doc.get("wind", {"kind": "shear"})
    _check_keys(wind_node, {"kind", "params"}, "wind")
    params = wind_node.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ParseError("wind.params must be a mapping", line=_line(wind_node, "params"), key="wind.params")

    unc = doc.get("uncertainty", {})
    _check_keys(unc, UNCERTAINTY_KEYS, "uncertainty")
    avo = doc.get("avoidance", {})
    _check_keys(avo, AVOIDANCE_KEYS, "avoidance")

    initial = doc.get("initial_positions", "given")
    if initial not in ("given", "random"):
        raise ParseError("initial_positions must be 'given' or 'random'", line=_line(doc, "initial_positions"), key="initial_positions")

    try:
        return SimConfig(
            region_min=lo,
            region_max=hi,
            swarms=tuple(swarms),
            wind=WindField(str(wind_node.get("kind", "shear")), dict(params)),
            tau=_num(doc, "tau", 1.0),
            dt=_num(doc, "dt", 0.01),
            duration=_num(doc, "duration", 5.0),
            seed=_num(doc, "seed", 0, int),
            quadrature=_num(doc, "quadrature", 64, int),
            major_ratio=_num(unc, "major_ratio", 0.15),
            minor_ratio=_num(unc, "minor_ratio", 0.005),
            alpha=_num(unc, "alpha", 0.5),
            responsibility=_num(avo, "responsibility", 0.5),
            intra_swarm_orca=_flag(avo, "intra_swarm_orca", True),
            saturate_preferred=_flag(avo, "saturate_preferred", True),
            clamp_separation=_flag(avo, "clamp_separation", False),
            random_initial=initial == "random",
            workers=_num(doc, "workers", 1, int),
        )
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    def weights(w: CoverageWeights):
        return {"s": w.s, "r": w.r}

    swarms = []
    for s in cfg.swarms:
        agents = []
        for a in s.agents:
            node: dict[str, Any] = {}
            if a.position is not None:
                node["position"] = list(a.position)
            node.update(radius=a.radius, v_max=a.v_max, weights=weights(a.weights), bias_estimate=list(a.bias_estimate))
            if a.bias is not None:
                node["bias"] = list(a.bias)
            agents.append(node)
        swarms.append({"published_weights": weights(s.published_weights), "agents": agents})
    return {
        "region": {"box": {"min": list(cfg.region_min), "max": list(cfg.region_max)}},
        "swarms": swarms,
        "wind": {"kind": cfg.wind.kind, "params": dict(cfg.wind.params)},
        "tau": cfg.tau,
        "dt": cfg.dt,
        "duration": cfg.duration,
        "seed": cfg.seed,
        "quadrature": cfg.quadrature,
        "uncertainty": {"major_ratio": cfg.major_ratio, "minor_ratio": cfg.minor_ratio, "alpha": cfg.alpha},
        "avoidance": {
            "responsibility": cfg.responsibility,
            "intra_swarm_orca": cfg.intra_swarm_orca,
            "saturate_preferred": cfg.saturate_preferred,
            "clamp_separation": cfg.clamp_separation,
        },
        "initial_positions": "random" if cfg.random_initial else "given",
        "workers": cfg.workers,
    }


def serialize_config(cfg: SimConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def load_config(path: str | Path) -> SimConfig:
    """Read a config file; bare names of bundled configs are resolved too."""
    p = Path(path)
    if not p.exists() and p.name in BUNDLED and len(p.parts) == 1:
        text = resources.files("swarmcov").joinpath("data", p.name).read_text()
    else:
        text = p.read_text()
    return parse_config(text)


def paper_config() -> SimConfig:
    return load_config("paper_sec4.cfg")
