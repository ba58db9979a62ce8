"""Deterministic 2D world: unicycle agent, scripted persons, obstacles, lidar."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    point_rect_distance,
    ray_circles_hits,
    ray_segments_hits,
    rect_segments,
    wrap_angle,
)

PERSON_RADIUS = 0.25
AGENT_RADIUS = 0.30


class ConfigError(ValueError):
    """Raised when a scenario or world configuration fails validation."""


@dataclass
class Obstacle:
    """Axis-aligned rectangle or circle. For rects, shape = (x0, y0, x1, y1);
    for circles, shape = (cx, cy, r)."""

    shape: tuple
    kind: str = "wall"
    is_circle: bool = False

    def __post_init__(self):
        if self.is_circle:
            if len(self.shape) != 3 or self.shape[2] <= 0:
                raise ConfigError(f"circle obstacle needs (cx, cy, r>0), got {self.shape}")
        else:
            x0, y0, x1, y1 = self.shape
            if x1 <= x0 or y1 <= y0:
                raise ConfigError(f"rect obstacle needs positive area, got {self.shape}")

    def distance(self, px: float, py: float) -> float:
        if self.is_circle:
            cx, cy, r = self.shape
            return max(0.0, math.hypot(px - cx, py - cy) - r)
        return point_rect_distance(px, py, *self.shape)

    def contains(self, px: float, py: float, inflate: float = 0.0) -> bool:
        return self.distance(px, py) < inflate if inflate > 0 else self.distance(px, py) <= 0.0

    @property
    def min_thickness(self) -> float:
        if self.is_circle:
            return 2.0 * self.shape[2]
        x0, y0, x1, y1 = self.shape
        return min(x1 - x0, y1 - y0)


@dataclass
class WorldConfig:
    arena: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    obstacles: list[Obstacle] = field(default_factory=list)
    tick_rate: float = 30.0
    rng_seed: int = 0
    v_max: float = 1.5
    omega_max: float = 1.5
    max_accel: float | None = None  # m/s^2 slew limit on linear speed; None = instant
    lidar_max_range: float = 12.0
    lidar_rays: int = 360
    marker_margin: float = 1.0  # random markers keep this far from the walls

    def validate(self) -> None:
        x0, y0, x1, y1 = self.arena
        if x1 <= x0 or y1 <= y0:
            raise ConfigError(f"arena must be non-degenerate, got {self.arena}")
        if self.tick_rate <= 0:
            raise ConfigError("tick_rate must be > 0")
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ConfigError("actuator bounds must be > 0")
        step = self.v_max / self.tick_rate
        for ob in self.obstacles:
            if self._obstacle_outside(ob):
                raise ConfigError(f"obstacle {ob.shape} lies outside arena {self.arena}")
            if ob.min_thickness <= step:
                raise ConfigError(
                    f"obstacle thinner ({ob.min_thickness:.3f} m) than per-tick step "
                    f"({step:.3f} m); tunneling possible"
                )

    def _obstacle_outside(self, ob: Obstacle) -> bool:
        x0, y0, x1, y1 = self.arena
        if ob.is_circle:
            cx, cy, r = ob.shape
            return cx - r < x0 or cy - r < y0 or cx + r > x1 or cy + r > y1
        ox0, oy0, ox1, oy1 = ob.shape
        return ox0 < x0 or oy0 < y0 or ox1 > x1 or oy1 > y1


@dataclass
class PersonState:
    id: int
    position: tuple[float, float]
    heading: float = 0.0
    speed: float = 1.0
    height: float = 1.7
    role: str = "target"

    def __post_init__(self):
        if not 0.0 <= self.speed <= 2.5:
            raise ConfigError(f"person speed {self.speed} outside [0, 2.5] m/s")
        self.heading = wrap_angle(self.heading)


@dataclass
class AgentState:
    position: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0


@dataclass(frozen=True)
class ControlCommand:
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0

    def clamped(self, v_max: float, omega_max: float) -> "ControlCommand":
        v = self.linear_velocity if math.isfinite(self.linear_velocity) else 0.0
        w = self.angular_velocity if math.isfinite(self.angular_velocity) else 0.0
        return ControlCommand(
            min(v_max, max(-v_max, v)),
            min(omega_max, max(-omega_max, w)),
        )


STOP = ControlCommand(0.0, 0.0)


@dataclass
class LidarScan:
    ranges: np.ndarray  # (n_rays,), inf where no return within max_range
    max_range: float
    angles: np.ndarray  # ray bearings relative to agent heading

    def min_range(self) -> float:
        finite = self.ranges[np.isfinite(self.ranges)]
        return float(finite.min()) if len(finite) else float("inf")


# --- person motion policies ---


class RandomMarkersPolicy:
    """Walk to k uniformly drawn markers; pause briefly at each."""

    def __init__(self, count: int = 15, pause: float = 0.6, arrive_radius: float = 0.2):
        self.count = count
        self.pause = pause
        self.arrive_radius = arrive_radius
        self.visited = 0
        self.waypoint: tuple[float, float] | None = None
        self._pause_left = 0.0

    def done(self) -> bool:
        return self.visited >= self.count


class CoursePolicy:
    """Follow a fixed waypoint course once."""

    def __init__(self, waypoints: list[tuple[float, float]], arrive_radius: float = 0.2):
        if not waypoints:
            raise ConfigError("course needs at least one waypoint")
        self.waypoints = [tuple(map(float, w)) for w in waypoints]
        self.arrive_radius = arrive_radius
        self.index = 0

    def done(self) -> bool:
        return self.index >= len(self.waypoints)


class InterfererPolicy:
    """Random walk that periodically cuts the agent-to-target line."""

    def __init__(self, crossing_probability: float = 0.6, arrive_radius: float = 0.3):
        self.crossing_probability = crossing_probability
        self.arrive_radius = arrive_radius
        self.waypoint: tuple[float, float] | None = None
        self.crossing_exit: tuple[float, float] | None = None

    def done(self) -> bool:
        return False


class World:
    """Owns all simulation state; advanced by step(). Deterministic per seed."""

    def __init__(self, config: WorldConfig, agent: AgentState, persons: list[PersonState],
                 policies: dict[int, object]):
        config.validate()
        self.config = config
        self.agent = agent
        self.persons = list(persons)
        self.policies = dict(policies)
        self.tick = 0
        self.collisions = 0
        self._agent_blocked_prev = False
        self._detour_signs: dict[int, int] = {}
        self._progress: dict[int, tuple] = {}
        self.rng = np.random.default_rng([config.rng_seed, 0])
        self._static_segs, self._static_circles = self._build_static_geometry()
        ang = np.arange(config.lidar_rays) * (2.0 * math.pi / config.lidar_rays)
        self._ray_angles = ang
        for p in persons:
            self._require_inside(p.position, f"person {p.id}")
        self._require_inside(agent.position, "agent")

    # --- geometry ---

    def _build_static_geometry(self):
        x0, y0, x1, y1 = self.config.arena
        segs = list(rect_segments(x0, y0, x1, y1))
        circles = []
        for ob in self.config.obstacles:
            if ob.is_circle:
                circles.append(ob.shape)
            else:
                segs.extend(rect_segments(*ob.shape))
        return np.array(segs, dtype=float), np.array(circles, dtype=float).reshape(-1, 3)

    def _require_inside(self, pos, label):
        x0, y0, x1, y1 = self.config.arena
        if not (x0 <= pos[0] <= x1 and y0 <= pos[1] <= y1):
            raise ConfigError(f"{label} position {pos} outside arena")

    def _blocked(self, px: float, py: float, radius: float,
                 ignore_person: int | None = None, check_agent: bool = False,
                 agent_scale: float = 1.0) -> bool:
        x0, y0, x1, y1 = self.config.arena
        if px - radius < x0 or py - radius < y0 or px + radius > x1 or py + radius > y1:
            return True
        for ob in self.config.obstacles:
            if ob.distance(px, py) < radius:
                return True
        for p in self.persons:
            if p.id == ignore_person:
                continue
            if math.hypot(px - p.position[0], py - p.position[1]) < radius + PERSON_RADIUS:
                return True
        if check_agent:
            ax, ay = self.agent.position
            if math.hypot(px - ax, py - ay) < (radius + AGENT_RADIUS) * agent_scale:
                return True
        return False

    # --- stepping ---

    def step(self, command: ControlCommand) -> None:
        """Advance one tick: agent kinematics, person policies, collision freezing."""
        dt = 1.0 / self.config.tick_rate
        cmd = command.clamped(self.config.v_max, self.config.omega_max)
        a = self.agent
        v = cmd.linear_velocity
        if self.config.max_accel is not None:
            dv = self.config.max_accel * dt
            v = min(a.linear_velocity + dv, max(a.linear_velocity - dv, v))
        w = cmd.angular_velocity
        nx = a.position[0] + v * math.cos(a.heading) * dt
        ny = a.position[1] + v * math.sin(a.heading) * dt
        if v != 0.0 and self._blocked(nx, ny, AGENT_RADIUS, check_agent=False):
            # freeze at contact: translation blocked this tick, rotation still applies
            if not self._agent_blocked_prev:
                self.collisions += 1
            self._agent_blocked_prev = True
            a.linear_velocity = 0.0
        else:
            self._agent_blocked_prev = False
            a.position = (nx, ny)
            a.linear_velocity = v
        a.heading = wrap_angle(a.heading + w * dt)
        a.angular_velocity = w

        for person in self.persons:
            policy = self.policies.get(person.id)
            if policy is not None:
                self.person_policy_step(person, policy, dt)
        self.tick += 1

    def person_policy_step(self, person: PersonState, policy, dt: float) -> None:
        if isinstance(policy, RandomMarkersPolicy):
            self._step_markers(person, policy, dt)
        elif isinstance(policy, CoursePolicy):
            self._step_course(person, policy, dt)
        elif isinstance(policy, InterfererPolicy):
            self._step_interferer(person, policy, dt)
        else:
            raise ConfigError(f"unknown policy {policy!r}")

    def _step_markers(self, person, policy, dt):
        if policy.done():
            return
        if policy._pause_left > 0.0:
            policy._pause_left = max(0.0, policy._pause_left - dt)
            return
        if policy.waypoint is None:
            policy.waypoint = self._draw_marker(person.position)
        if self._walk_towards(person, policy.waypoint, dt, policy.arrive_radius) \
                or self._gave_up(person, policy.waypoint, dt):
            policy.visited += 1
            policy.waypoint = None
            policy._pause_left = policy.pause

    def _step_course(self, person, policy, dt):
        if policy.done():
            return
        wp = policy.waypoints[policy.index]
        if self._walk_towards(person, wp, dt, policy.arrive_radius) \
                or self._gave_up(person, wp, dt):
            policy.index += 1

    def _step_interferer(self, person, policy, dt):
        if policy.waypoint is None:
            if policy.crossing_exit is not None:
                policy.waypoint = policy.crossing_exit
                policy.crossing_exit = None
            elif self.rng.random() < policy.crossing_probability:
                policy.waypoint, policy.crossing_exit = self._crossing_waypoints()
            else:
                policy.waypoint = self._draw_marker(person.position)
        if self._walk_towards(person, policy.waypoint, dt, policy.arrive_radius) \
                or self._gave_up(person, policy.waypoint, dt):
            policy.waypoint = None

    def _gave_up(self, person: PersonState, waypoint, dt: float, limit: float = 3.0) -> bool:
        """True once a person has made no progress toward the waypoint for
        `limit` seconds; the blocked waypoint is abandoned so nobody dances
        against an obstacle (or the agent) forever."""
        dist = math.hypot(person.position[0] - waypoint[0], person.position[1] - waypoint[1])
        state = self._progress.get(person.id)
        if state is None or state[0] != waypoint or dist < state[1] - 0.02:
            self._progress[person.id] = (waypoint, dist, 0.0)
            return False
        stuck = state[2] + dt
        if stuck >= limit:
            del self._progress[person.id]
            return True
        self._progress[person.id] = (waypoint, state[1], stuck)
        return False

    def _crossing_waypoints(self):
        """A point on the agent->target segment plus an exit point beyond it."""
        target = next((p for p in self.persons if p.role == "target"), None)
        ax, ay = self.agent.position
        if target is None:
            return self._draw_marker((ax, ay)), None
        tx, ty = target.position
        dist = math.hypot(tx - ax, ty - ay)
        # keep the crossing point clear of the agent's body
        lam_min = min(0.9, max(0.35, 1.3 / dist)) if dist > 1e-6 else 0.5
        lam = self.rng.uniform(lam_min, max(lam_min, 0.7))
        cx, cy = ax + lam * (tx - ax), ay + lam * (ty - ay)
        dx, dy = tx - ax, ty - ay
        norm = math.hypot(dx, dy) or 1.0
        # continue straight through, perpendicular to the follow line
        side = 1.0 if self.rng.random() < 0.5 else -1.0
        px, py = -dy / norm * side, dx / norm * side
        exit_pt = self._clamp_into_arena(cx + 2.5 * px, cy + 2.5 * py)
        cross_pt = self._clamp_into_arena(cx, cy)
        return cross_pt, exit_pt

    def _clamp_into_arena(self, x, y, margin=0.5):
        x0, y0, x1, y1 = self.config.arena
        return (min(x1 - margin, max(x0 + margin, x)), min(y1 - margin, max(y0 + margin, y)))

    def _draw_marker(self, away_from, min_dist=1.5, margin=None, tries=100):
        x0, y0, x1, y1 = self.config.arena
        margin = self.config.marker_margin if margin is None else margin
        pt = away_from
        for _ in range(tries):
            x = self.rng.uniform(x0 + margin, x1 - margin)
            y = self.rng.uniform(y0 + margin, y1 - margin)
            if math.hypot(x - away_from[0], y - away_from[1]) < min_dist:
                continue
            if any(ob.distance(x, y) < PERSON_RADIUS + 0.1 for ob in self.config.obstacles):
                continue
            return (x, y)
        return pt

    def _walk_towards(self, person, waypoint, dt, arrive_radius) -> bool:
        """Move one step toward waypoint, deflecting around obstacles. True on arrival.

        Detours are sticky: once a person starts rounding an obstacle they keep
        deflecting to the same side until the direct path is free again,
        otherwise long walls trap them in a left/right oscillation.
        """
        px, py = person.position
        dx, dy = waypoint[0] - px, waypoint[1] - py
        dist = math.hypot(dx, dy)
        if dist <= arrive_radius:
            return True
        desired = math.atan2(dy, dx)
        step = min(person.speed * dt, dist)
        sign = self._detour_signs.get(person.id, 0)
        magnitudes = (0.5, 1.0, 1.6, 2.2)
        deltas = [0.0]
        if sign == 0:
            for m in magnitudes:
                deltas += [m, -m]
        else:
            deltas += [sign * m for m in magnitudes]
            deltas += [-sign * m for m in magnitudes]
        for agent_scale in (1.0, 0.7):  # wedged people squeeze past the robot
            for delta in deltas:
                h = desired + delta
                nx, ny = px + step * math.cos(h), py + step * math.sin(h)
                if not self._blocked(nx, ny, PERSON_RADIUS, ignore_person=person.id,
                                     check_agent=True, agent_scale=agent_scale):
                    self._detour_signs[person.id] = 0 if delta == 0.0 else (1 if delta > 0 else -1)
                    person.position = (nx, ny)
                    person.heading = wrap_angle(h)
                    return math.hypot(waypoint[0] - nx, waypoint[1] - ny) <= arrive_radius
        # boxed in: frozen this tick; give up on waypoints blocked at close range
        return dist <= 0.75

    # --- sensing support ---

    def lidar_scan(self) -> LidarScan:
        """Ray-cast 360 degrees (agent frame) against walls, obstacles, and persons."""
        ox, oy = self.agent.position
        ang = self._ray_angles + self.agent.heading
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        t = ray_segments_hits(ox, oy, dirs, self._static_segs)
        circles = list(self._static_circles)
        for p in self.persons:
            circles.append((p.position[0], p.position[1], PERSON_RADIUS))
        tc = ray_circles_hits(ox, oy, dirs, np.array(circles).reshape(-1, 3))
        t = np.minimum(t, tc)
        t = np.where(t <= self.config.lidar_max_range, t, np.inf)
        return LidarScan(ranges=t, max_range=self.config.lidar_max_range,
                         angles=self._ray_angles.copy())

    def person_by_role(self, role: str) -> PersonState | None:
        return next((p for p in self.persons if p.role == role), None)

    def protocol_done(self) -> bool:
        target = self.person_by_role("target")
        if target is None:
            return True
        policy = self.policies.get(target.id)
        return policy.done() if policy is not None else True
