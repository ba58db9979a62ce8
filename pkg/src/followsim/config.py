"""Scenario and suite configuration files (YAML) and provenance hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import replace
from pathlib import Path

import yaml

from .control import CameraSwitchConfig, PlannerConfig, SearchConfig, ServoConfig
from .harness import (
    Participant,
    ScenarioSpec,
    VARIANT_PRESETS,
    VariantConfig,
    default_scenario,
)
from .reid import RegistrationConfig, ReidConfig
from .sensing import SensorNoise
from .tracking import TrackerConfig
from .world import ConfigError, Obstacle, WorldConfig


def config_hash(data) -> str:
    """sha256 over the canonical JSON form of a config mapping."""
    return hashlib.sha256(
        json.dumps(data, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:16]


def _build(cls, data: dict, **extra):
    try:
        return cls(**{**data, **extra})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad {cls.__name__} section: {e}") from e


def scenario_from_dict(data: dict) -> ScenarioSpec:
    obstacles = []
    for ob in data.get("obstacles", []):
        if "rect" in ob:
            obstacles.append(Obstacle(tuple(ob["rect"]), kind=ob.get("kind", "wall")))
        elif "circle" in ob:
            obstacles.append(Obstacle(tuple(ob["circle"]), kind=ob.get("kind", "chair"),
                                      is_circle=True))
        else:
            raise ConfigError(f"obstacle needs 'rect' or 'circle': {ob}")
    base = default_scenario()
    world = WorldConfig(
        arena=tuple(data.get("arena", base.world.arena)),
        obstacles=obstacles if "obstacles" in data else base.world.obstacles,
        tick_rate=float(data.get("tick_rate", base.world.tick_rate)),
        rng_seed=int(data.get("seed", 0)),
        v_max=float(data.get("v_max", base.world.v_max)),
        omega_max=float(data.get("omega_max", base.world.omega_max)),
        max_accel=data.get("max_accel", base.world.max_accel),
        lidar_max_range=float(data.get("lidar_max_range", base.world.lidar_max_range)),
        lidar_rays=int(data.get("lidar_rays", base.world.lidar_rays)),
    )

    persons = data.get("persons", {})
    target = persons.get("target", {})
    interferer = persons.get("interferer", {})
    speeds = target.get("speeds", [p.speed for p in base.participants])
    participants = [Participant(identity_seed=1000 + i, speed=float(s))
                    for i, s in enumerate(speeds)]
    agent = data.get("agent", {})
    protocol = data.get("protocol", {})
    control = data.get("control", {})

    spec = ScenarioSpec(
        world=world,
        protocol=protocol.get("type", base.protocol),
        marker_count=int(protocol.get("count", base.marker_count)),
        course_waypoints=[tuple(w) for w in protocol.get("waypoints", [])],
        agent_start=(*agent.get("start", base.agent_start[:2]),
                     float(agent.get("heading", base.agent_start[2]))),
        target_start=tuple(target.get("start", base.target_start)),
        interferer_start=tuple(interferer.get("start", base.interferer_start)),
        interferer_speed=float(interferer.get("speed", base.interferer_speed)),
        crossing_probability=float(interferer.get("crossing_probability",
                                                  base.crossing_probability)),
        participants=participants,
        registration=_build(RegistrationConfig, data.get("registration", {})),
        noise=_build(SensorNoise, data.get("sensors", {})),
        tracker=_build(TrackerConfig, data.get("tracker", {})),
        switch=_build(CameraSwitchConfig, control.get("switch", {})),
        servo=_build(ServoConfig, control.get("servo", {})),
        search=_build(SearchConfig, control.get("search", {})),
        planner=_build(PlannerConfig, control.get("planner", {})),
        reid=_build(ReidConfig, data.get("reid", {})),
        max_duration=float(data.get("max_duration", base.max_duration)),
    )
    spec.validate()
    return spec


def load_yaml(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: malformed YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def load_scenario(path: str | Path) -> tuple[ScenarioSpec, str]:
    data = load_yaml(path)
    return scenario_from_dict(data), config_hash(data)


def load_suite(path: str | Path) -> tuple[list[ScenarioSpec], list[VariantConfig],
                                          list[int], str]:
    data = load_yaml(path)

    def resolve(entry):
        if isinstance(entry, str):
            return load_scenario(Path(path).parent / entry)[0]
        return scenario_from_dict(entry)

    if "scenarios" in data:
        scenarios = [resolve(e) for e in data["scenarios"]]
    elif "scenario" in data:
        scenarios = [resolve(data["scenario"])]
    else:
        scenarios = [default_scenario()]
    names = data.get("variants", list(VARIANT_PRESETS))
    variants = [variant_by_name(n) for n in names]
    seeds_spec = data.get("seeds", {"count": 25, "start": 0})
    if isinstance(seeds_spec, list):
        seeds = [int(s) for s in seeds_spec]
    else:
        start = int(seeds_spec.get("start", 0))
        seeds = list(range(start, start + int(seeds_spec.get("count", 25))))
    if not seeds:
        raise ConfigError("suite needs at least one seed")
    return scenarios, variants, seeds, config_hash(data)


def variant_by_name(name: str) -> VariantConfig:
    key = name.lower()
    if key not in VARIANT_PRESETS:
        raise ConfigError(
            f"unknown variant {name!r}; choose from {', '.join(VARIANT_PRESETS)}")
    return VARIANT_PRESETS[key]


def default_suite() -> tuple[list[ScenarioSpec], list[VariantConfig], list[int], str]:
    """The bundled ablation: all seven variants, random markers, 25 seeds."""
    return ([default_scenario()], list(VARIANT_PRESETS.values()), list(range(25)),
            config_hash({"suite": "default"}))


def scenario_with_seed(spec: ScenarioSpec, seed: int | None) -> ScenarioSpec:
    if seed is None:
        return spec
    return replace(spec, world=replace(spec.world, rng_seed=int(seed)))
