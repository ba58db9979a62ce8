"""Experiment harness: ablation variants, seeded trials, the five metrics,
and suite aggregation across the variant matrix."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .control import (
    SEARCH,
    CameraSwitchConfig,
    FollowPipeline,
    PlannerConfig,
    SearchConfig,
    ServoConfig,
)
from .reid import FeatureBank, RegistrationConfig, ReidConfig, register_target
from .sensing import CameraModel, IdentityProfile, Sensor, SensorNoise
from .tracking import Tracker, TrackerConfig
from .world import (
    AgentState,
    ConfigError,
    CoursePolicy,
    InterfererPolicy,
    Obstacle,
    PersonState,
    RandomMarkersPolicy,
    World,
    WorldConfig,
)

TARGET_ID = 1
INTERFERER_ID = 2

LOG_FIELDS = [
    "t", "mode", "camera", "fresh", "reid", "v_cmd", "w_cmd",
    "ax", "ay", "ah", "v_act", "tx", "ty", "th", "ix", "iy", "ih",
    "followed", "min_range", "collisions",
]


@dataclass(frozen=True)
class VariantConfig:
    name: str
    use_motion_tracker: bool = True
    use_torso_id: bool = True
    use_face_id: bool = True
    use_visual_servo: bool = True
    use_path_planning: bool = True

    @property
    def reid_enabled(self) -> bool:
        return self.use_torso_id or self.use_face_id


# The seven presets of the ablation matrix, keyed by CLI name.
VARIANT_PRESETS: dict[str, VariantConfig] = {
    "ours": VariantConfig("ours"),
    "ours_wo_reid": VariantConfig("ours_wo_reid", use_torso_id=False, use_face_id=False),
    "ours_wo_motion": VariantConfig("ours_wo_motion", use_motion_tracker=False),
    "ours_wo_torso": VariantConfig("ours_wo_torso", use_torso_id=False),
    "ours_wo_face": VariantConfig("ours_wo_face", use_face_id=False),
    "ours_wo_visualservo": VariantConfig("ours_wo_visualservo", use_visual_servo=False),
    "ours_wo_pathplanning": VariantConfig("ours_wo_pathplanning", use_path_planning=False),
}


@dataclass(frozen=True)
class Participant:
    identity_seed: int
    speed: float


def default_participants() -> list[Participant]:
    speeds = [0.8, 0.95, 1.1, 1.25, 1.4]
    return [Participant(identity_seed=1000 + i, speed=s) for i, s in enumerate(speeds)]


@dataclass
class ScenarioSpec:
    world: WorldConfig
    protocol: str = "random_markers"  # "random_markers" | "course"
    marker_count: int = 15
    course_waypoints: list[tuple[float, float]] = field(default_factory=list)
    agent_start: tuple[float, float, float] = (1.2, 1.2, 0.785)
    target_start: tuple[float, float] = (2.6, 2.6)
    interferer_start: tuple[float, float] = (8.5, 1.5)
    interferer_speed: float = 1.25
    crossing_probability: float = 0.6
    participants: list[Participant] = field(default_factory=default_participants)
    interferer_identity_base: int = 5000
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    noise: SensorNoise = field(default_factory=SensorNoise)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    switch: CameraSwitchConfig = field(default_factory=CameraSwitchConfig)
    servo: ServoConfig = field(default_factory=ServoConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    reid: ReidConfig = field(default_factory=ReidConfig)
    max_duration: float = 150.0
    wrong_person_min_duration: float = 1.0

    def validate(self) -> None:
        self.world.validate()
        if self.protocol not in ("random_markers", "course"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.protocol == "course":
            if not self.course_waypoints:
                raise ConfigError("course protocol needs waypoints")
            x0, y0, x1, y1 = self.world.arena
            for wx, wy in self.course_waypoints:
                if not (x0 <= wx <= x1 and y0 <= wy <= y1):
                    raise ConfigError(f"course waypoint ({wx}, {wy}) outside arena")
        if not self.participants:
            raise ConfigError("scenario needs at least one participant")
        if not (self.switch.to_rgbd_height_frac < self.servo.height_setpoint < 1.0):
            raise ConfigError(
                "servo height setpoint must lie between the rgbd switch "
                "threshold and 1.0")


def default_scenario() -> ScenarioSpec:
    """Desk-scale office: a desk, two chairs, a cabinet, and a wall stub."""
    world = WorldConfig(
        arena=(0.0, 0.0, 10.0, 10.0),
        obstacles=[
            Obstacle((1.2, 9.3, 2.8, 10.0), kind="desk"),
            Obstacle((3.2, 6.4, 0.3), kind="chair", is_circle=True),
            Obstacle((6.6, 2.4, 0.3), kind="chair", is_circle=True),
            Obstacle((7.2, 6.8, 0.3), kind="chair", is_circle=True),
            Obstacle((0.0, 3.8, 0.6, 5.4), kind="cabinet"),
            Obstacle((9.4, 3.6, 10.0, 5.2), kind="cabinet"),
        ],
        tick_rate=30.0,
        max_accel=1.0,
    )
    return ScenarioSpec(world=world)


@dataclass
class TrialResult:
    variant: str
    seed: int
    avg_speed: float
    avg_follow_distance: float
    avg_obstacle_distance: float
    lost_target: bool
    wrong_person_events: int
    collisions: int
    ticks: int
    follow_ticks: int
    completed: bool
    log_path: str | None = None


# --- registration session ---


def run_registration(profile: IdentityProfile, scenario: ScenarioSpec, seed: int,
                     mode: str | None = None) -> FeatureBank:
    """Simulate the turn-in-front-of-the-agent capture and build the bank."""
    reg = replace(scenario.registration, rng_seed=seed,
                  mode=mode or scenario.registration.mode)
    frames = int(round(reg.duration * scenario.world.tick_rate))
    person = PersonState(id=TARGET_ID, position=(3.0, 2.0), heading=math.pi)
    world = World(
        WorldConfig(arena=(0.0, 0.0, 6.0, 4.0), tick_rate=scenario.world.tick_rate,
                    rng_seed=seed),
        AgentState(position=(1.0, 2.0), heading=0.0),
        [person], {},
    )
    sensor = Sensor(CameraModel.rgbd(), {TARGET_ID: profile}, noise=scenario.noise,
                    rng=np.random.default_rng([seed, 4]))
    angle_rng = np.random.default_rng([seed, 5])
    facing_agent = math.pi  # heading that points the person straight at the agent

    def stream():
        for i in range(frames):
            if reg.mode == "full_360":
                view = 2.0 * math.pi * i / frames
            else:
                block = 0.0 if (i // 30) % 2 == 0 else math.pi
                view = block + angle_rng.uniform(-reg.standard_tolerance,
                                                 reg.standard_tolerance)
            person.heading = facing_agent - view
            dets = sensor.render(world)
            yield dets[0] if dets else None

    return register_target(stream(), reg)


# --- trial execution ---


def build_world(scenario: ScenarioSpec, participant: Participant, seed: int) -> World:
    cfg = replace(scenario.world, rng_seed=seed)
    ax, ay, ah = scenario.agent_start
    target = PersonState(id=TARGET_ID, position=tuple(scenario.target_start),
                         heading=0.0, speed=participant.speed, role="target")
    interferer = PersonState(id=INTERFERER_ID, position=tuple(scenario.interferer_start),
                             heading=0.0, speed=scenario.interferer_speed,
                             role="interferer")
    if scenario.protocol == "random_markers":
        target_policy = RandomMarkersPolicy(count=scenario.marker_count)
    else:
        target_policy = CoursePolicy(scenario.course_waypoints)
    policies = {
        TARGET_ID: target_policy,
        INTERFERER_ID: InterfererPolicy(crossing_probability=scenario.crossing_probability),
    }
    return World(cfg, AgentState(position=(ax, ay), heading=ah),
                 [target, interferer], policies)


def build_pipeline(scenario: ScenarioSpec, variant: VariantConfig,
                   bank: FeatureBank | None, seed: int) -> FollowPipeline:
    profiles = {
        TARGET_ID: IdentityProfile.from_seed(
            scenario.participants[seed % len(scenario.participants)].identity_seed,
            dim=scenario.noise.dim),
        INTERFERER_ID: IdentityProfile.from_seed(
            scenario.interferer_identity_base + seed, dim=scenario.noise.dim),
    }
    sensors = {
        "fisheye": Sensor(CameraModel.fisheye(), profiles, noise=scenario.noise,
                          rng=np.random.default_rng([seed, 2])),
        "rgbd": Sensor(CameraModel.rgbd(), profiles, noise=scenario.noise,
                       rng=np.random.default_rng([seed, 3])),
    }
    pipeline = FollowPipeline(
        sensors=sensors,
        bank=bank,
        use_motion_tracker=variant.use_motion_tracker,
        use_torso_id=variant.use_torso_id,
        use_face_id=variant.use_face_id,
        use_visual_servo=variant.use_visual_servo,
        use_path_planning=variant.use_path_planning,
        switch_config=scenario.switch,
        servo_config=scenario.servo,
        search_config=scenario.search,
        planner_config=scenario.planner,
        tracker=Tracker(scenario.tracker) if variant.use_motion_tracker else None,
        v_max=scenario.world.v_max,
        omega_max=scenario.world.omega_max,
        reid_config=scenario.reid,
    )
    pipeline.tick_rate = scenario.world.tick_rate
    return pipeline


def log_header(scenario: ScenarioSpec, variant: VariantConfig, seed: int,
               config_hash: str = "") -> dict:
    return {
        "seed": seed,
        "variant": variant.name,
        "config_sha256": config_hash,
        "tick_rate": scenario.world.tick_rate,
        "give_up_after": scenario.search.give_up_after,
        "wrong_person_min_duration": scenario.wrong_person_min_duration,
        "target_id": TARGET_ID,
        "fields": LOG_FIELDS,
    }


def run_trial(scenario: ScenarioSpec, variant: VariantConfig, seed: int,
              log_path: str | Path | None = None,
              config_hash: str = "",
              bank: FeatureBank | None = None,
              detections_path: str | Path | None = None) -> TrialResult:
    """One seeded closed-loop trial; metrics are derived from the tick log.

    A pre-registered feature bank may be supplied (the two-phase register /
    follow workflow); otherwise registration runs inline for re-id variants.
    """
    scenario.validate()
    participant = scenario.participants[seed % len(scenario.participants)]
    if bank is None and variant.reid_enabled:
        profile = IdentityProfile.from_seed(participant.identity_seed,
                                            dim=scenario.noise.dim)
        bank = run_registration(profile, scenario, seed)
    world = build_world(scenario, participant, seed)
    pipeline = build_pipeline(scenario, variant, bank if variant.reid_enabled else None,
                              seed)
    det_sink: list | None = [] if detections_path is not None else None
    pipeline.detection_sink = det_sink

    tick_rate = scenario.world.tick_rate
    give_up_ticks = int(round(scenario.search.give_up_after * tick_rate))
    max_ticks = int(round(scenario.max_duration * tick_rate))
    header = log_header(scenario, variant, seed, config_hash)
    rows: list[list] = []
    search_run = 0
    completed = False
    target = world.person_by_role("target")
    interferer = world.person_by_role("interferer")

    for t in range(max_ticks):
        scan = world.lidar_scan()
        info = pipeline.tick(world, scan)
        world.step(info.command)
        rows.append([
            t, info.mode, info.camera, int(info.fresh), int(info.reid_invoked),
            round(info.command.linear_velocity, 9), round(info.command.angular_velocity, 9),
            round(world.agent.position[0], 9), round(world.agent.position[1], 9),
            round(world.agent.heading, 9), round(world.agent.linear_velocity, 9),
            round(target.position[0], 9), round(target.position[1], 9),
            round(target.heading, 9),
            round(interferer.position[0], 9) if interferer else 0.0,
            round(interferer.position[1], 9) if interferer else 0.0,
            round(interferer.heading, 9) if interferer else 0.0,
            info.followed_truth if info.followed_truth is not None else -1,
            round(scan.min_range(), 9), world.collisions,
        ])
        search_run = search_run + 1 if info.mode == SEARCH else 0
        if search_run >= give_up_ticks:
            break
        if world.protocol_done():
            completed = True
            break

    saved = None
    if log_path is not None:
        saved = str(log_path)
        write_tick_log(log_path, header, rows)
    if detections_path is not None:
        write_detection_log(detections_path, det_sink)
    result = compute_metrics(rows, header)
    return replace(result, variant=variant.name, seed=seed, log_path=saved,
                   completed=completed)


def write_detection_log(path: str | Path, frames: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for tick, camera, dets in frames:
            f.write(json.dumps({
                "tick": tick,
                "camera": camera,
                "detections": [
                    {
                        "center_u": round(d.body_box.center_u, 6),
                        "center_v": round(d.body_box.center_v, 6),
                        "height": round(d.body_box.height, 6),
                        "width": round(d.body_box.width, 6),
                        "depth": None if d.depth is None else round(d.depth, 6),
                        "has_face": d.face_box is not None,
                    } for d in dets
                ],
            }) + "\n")


def write_tick_log(path: str | Path, header: dict, rows: list[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for row in rows:
            f.write(json.dumps(row) + "\n")


def read_tick_log(path: str | Path) -> tuple[dict, list[list]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    return header, [json.loads(ln) for ln in lines[1:]]


def compute_metrics(rows: list[list], header: dict) -> TrialResult:
    """The five reported metrics, derived from the tick log alone."""
    if not rows:
        raise ValueError("empty tick log")
    idx = {name: i for i, name in enumerate(LOG_FIELDS)}
    tick_rate = header["tick_rate"]
    target_id = header["target_id"]
    give_up_ticks = int(round(header["give_up_after"] * tick_rate))
    wrong_min_ticks = int(round(header["wrong_person_min_duration"] * tick_rate))

    follow = [r for r in rows if r[idx["mode"]] != SEARCH]
    avg_speed = (sum(abs(r[idx["v_act"]]) for r in follow) / len(follow)) if follow else 0.0
    avg_dist = (sum(math.hypot(r[idx["ax"]] - r[idx["tx"]], r[idx["ay"]] - r[idx["ty"]])
                    for r in follow) / len(follow)) if follow else 0.0
    avg_obstacle = sum(r[idx["min_range"]] for r in rows) / len(rows)

    lost = False
    run = 0
    for r in rows:
        run = run + 1 if r[idx["mode"]] == SEARCH else 0
        if run >= give_up_ticks:
            lost = True
            break

    wrong_events = 0
    run = 0
    for r in rows:
        followed = r[idx["followed"]]
        if followed != -1 and followed != target_id:
            run += 1
            if run == wrong_min_ticks + 1:  # strictly longer than the threshold
                wrong_events += 1
        else:
            run = 0

    return TrialResult(
        variant="", seed=-1,
        avg_speed=avg_speed,
        avg_follow_distance=avg_dist,
        avg_obstacle_distance=avg_obstacle,
        lost_target=lost,
        wrong_person_events=wrong_events,
        collisions=rows[-1][idx["collisions"]],
        ticks=len(rows),
        follow_ticks=len(follow),
        completed=False,
    )


# --- suite execution ---


@dataclass
class VariantSummary:
    variant: str
    trials: int
    mean_speed: float
    mean_follow_distance: float
    mean_obstacle_distance: float
    lost_count: int
    wrong_count: int

    def row(self) -> list:
        return [self.variant, f"{self.mean_speed:.2f}", f"{self.mean_follow_distance:.2f}",
                f"{self.mean_obstacle_distance:.2f}",
                f"{self.lost_count} / {self.trials}", f"{self.wrong_count} / {self.trials}"]


@dataclass
class MetricsSummary:
    variants: list[VariantSummary]
    results: list[TrialResult]
    aborted: list[tuple[str, int, str]] = field(default_factory=list)

    def by_name(self, name: str) -> VariantSummary:
        return next(v for v in self.variants if v.variant == name)


def _trial_job(args):
    scenario_idx, scenario, variant, seed, config_hash = args
    try:
        return run_trial(scenario, variant, seed, config_hash=config_hash)
    except Exception as e:  # aborts are surfaced, the suite continues
        return (variant.name, seed, f"{type(e).__name__}: {e}")


def run_suite(scenarios, variants: list[VariantConfig], seeds: list[int],
              n_jobs: int | None = None, config_hash: str = "") -> MetricsSummary:
    """Cartesian product of scenarios x variants x seeds, parallel across
    trials, aggregated per variant in deterministic order. Aborted trials are
    recorded on the summary rather than stopping the suite."""
    if isinstance(scenarios, ScenarioSpec):
        scenarios = [scenarios]
    jobs = [(i, sc, v, s, config_hash)
            for i, sc in enumerate(scenarios) for v in variants for s in seeds]
    n_jobs = n_jobs if n_jobs is not None else (os.cpu_count() or 1)
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_trial_job, jobs, chunksize=2))
    else:
        outcomes = [_trial_job(j) for j in jobs]
    results = [r for r in outcomes if isinstance(r, TrialResult)]
    aborted = sorted(r for r in outcomes if not isinstance(r, TrialResult))
    results.sort(key=lambda r: (r.variant, r.seed))

    summaries = []
    for v in variants:
        rs = [r for r in results if r.variant == v.name]
        if not rs:
            summaries.append(VariantSummary(v.name, 0, math.nan, math.nan, math.nan, 0, 0))
            continue
        summaries.append(VariantSummary(
            variant=v.name,
            trials=len(rs),
            mean_speed=float(np.mean([r.avg_speed for r in rs])),
            mean_follow_distance=float(np.mean([r.avg_follow_distance for r in rs])),
            mean_obstacle_distance=float(np.mean([r.avg_obstacle_distance for r in rs])),
            lost_count=sum(1 for r in rs if r.lost_target),
            wrong_count=sum(1 for r in rs if r.wrong_person_events > 0),
        ))
    return MetricsSummary(variants=summaries, results=results, aborted=aborted)


def check_trends(summary: MetricsSummary) -> list[tuple[str, bool, str]]:
    """The four ordering properties the ablation table must reproduce."""
    ours = summary.by_name("ours")
    checks = []

    wo_reid = summary.by_name("ours_wo_reid")
    checks.append((
        "wrong_person(ours) <= wrong_person(ours_wo_reid)",
        ours.wrong_count <= wo_reid.wrong_count,
        f"{ours.wrong_count} vs {wo_reid.wrong_count}",
    ))
    wo_motion = summary.by_name("ours_wo_motion")
    checks.append((
        "avg_speed(ours) > avg_speed(ours_wo_motion)",
        ours.mean_speed > wo_motion.mean_speed,
        f"{ours.mean_speed:.3f} vs {wo_motion.mean_speed:.3f}",
    ))
    wo_plan = summary.by_name("ours_wo_pathplanning")
    checks.append((
        "avg_obstacle_distance(ours_wo_pathplanning) < avg_obstacle_distance(ours)",
        wo_plan.mean_obstacle_distance < ours.mean_obstacle_distance,
        f"{wo_plan.mean_obstacle_distance:.3f} vs {ours.mean_obstacle_distance:.3f}",
    ))
    ablation_lost = [v.lost_count for v in summary.variants if v.variant != "ours"]
    checks.append((
        "lost(ours) <= min(lost over ablations)",
        ours.lost_count <= min(ablation_lost) if ablation_lost else True,
        f"{ours.lost_count} vs min {min(ablation_lost) if ablation_lost else 'n/a'}",
    ))
    return checks


def summary_table(summary: MetricsSummary) -> str:
    headers = ["Variant", "Avg. Speed (m/s)", "Avg. Following Distance (m)",
               "Avg. Distance to Obstacles (m)", "# Losing Target", "# Following Wrong Person"]
    rows = [v.row() for v in summary.variants]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)


def summary_csv(summary: MetricsSummary) -> str:
    lines = ["variant,avg_speed_mps,avg_follow_distance_m,avg_obstacle_distance_m,"
             "lost_target,wrong_person,trials"]
    for v in summary.variants:
        lines.append(f"{v.variant},{v.mean_speed:.4f},{v.mean_follow_distance:.4f},"
                     f"{v.mean_obstacle_distance:.4f},{v.lost_count},{v.wrong_count},{v.trials}")
    return "\n".join(lines) + "\n"
