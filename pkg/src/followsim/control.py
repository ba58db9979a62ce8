"""Following state machine: dual-camera selection, visual servoing, local-goal
navigation, search behavior, the safety-filtering local planner, and the
perception latency model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle
from .reid import FeatureBank, ReidConfig, reidentify
from .sensing import BoundingBox, Detection, Sensor
from .tracking import Tracker
from .world import ControlCommand, LidarScan, STOP, World

FOLLOW_FISHEYE = "FOLLOW_FISHEYE"
FOLLOW_RGBD = "FOLLOW_RGBD"
SEARCH = "SEARCH"

# a re-id frame occupies the perception budget of ceil(30/8) camera frames
REID_STALL_TICKS = math.ceil(30 / 8) - 1


@dataclass
class CameraSwitchConfig:
    to_rgbd_height_frac: float = 0.45
    to_fisheye_distance: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.to_rgbd_height_frac < 1.0 or self.to_fisheye_distance <= 0:
            raise ValueError("invalid camera switch thresholds")


@dataclass
class ServoConfig:
    k_yaw: float = 1.0
    k_fwd: float = 2.0
    height_setpoint: float = 0.6
    deadband: float = 0.02
    standoff: float = 1.2   # goal pulled back toward the agent by this much
    yield_distance: float = 1.0  # back away when the person closes inside this

    def __post_init__(self):
        if self.k_yaw <= 0 or self.k_fwd <= 0:
            raise ValueError("servo gains must be positive")


@dataclass
class SearchConfig:
    goal_hold: float = 2.0
    search_spin_rate: float = 0.8
    give_up_after: float = 15.0

    def __post_init__(self):
        if min(self.goal_hold, self.search_spin_rate, self.give_up_after) <= 0:
            raise ValueError("search parameters must be positive")


@dataclass
class PlannerConfig:
    safety_radius: float = 0.45
    lookahead: float = 2.0
    n_linear: int = 5
    n_angular: int = 11
    rollout_steps: int = 8
    time_cap: float = 2.0
    control_horizon: float = 0.5  # goal cost is evaluated this far into the arc
    max_decel: float = 2.0

    def validate(self, v_max: float, robot_radius: float = 0.30) -> None:
        if self.safety_radius <= robot_radius:
            raise ValueError("safety_radius must exceed the robot radius")
        if v_max * v_max / (2.0 * self.max_decel) > self.lookahead:
            raise ValueError("stopping distance exceeds planner lookahead")


@dataclass
class FollowState:
    camera: str = "rgbd"  # which camera currently drives control
    target_track_id: int | None = None
    last_seen_bearing: float = 0.0
    last_seen_center: tuple[float, float] | None = None
    last_seen_goal: tuple[float, float] | None = None
    search_started_at: int | None = None  # tick index
    spin_sign: float = 1.0

    @property
    def mode(self) -> str:
        if self.target_track_id is None and self.search_started_at is not None:
            return SEARCH
        return FOLLOW_FISHEYE if self.camera == "fisheye" else FOLLOW_RGBD


def select_camera(current: str, box_height: float | None, depth: float | None,
                  config: CameraSwitchConfig) -> str:
    """Mode-local camera triggers; anything else keeps the current camera."""
    if current == "fisheye":
        if box_height is not None and box_height < config.to_rgbd_height_frac:
            return "rgbd"
    elif current == "rgbd":
        if depth is not None and depth < config.to_fisheye_distance:
            return "fisheye"
    return current


def visual_servo(target_box: BoundingBox, config: ServoConfig,
                 v_max: float = 1.5) -> ControlCommand:
    """Center the box and close the height gap. Image u grows to the right, so
    a negative center offset (target left) yields a positive (CCW) yaw."""
    u = target_box.center_u
    omega = -config.k_yaw * u if abs(u) > config.deadband else 0.0
    gap = config.height_setpoint - target_box.height
    v = min(v_max, max(0.0, config.k_fwd * gap)) if gap > config.deadband else 0.0
    return ControlCommand(v, omega)


def goal_from_depth(target_box: BoundingBox, depth: float,
                    agent_pose: tuple[float, float, float],
                    hfov: float, standoff: float = 1.2) -> tuple[float, float] | None:
    """World-frame local goal at the target's position, pulled back by the
    standoff so the agent stops short of the person."""
    if depth is None or not math.isfinite(depth):
        return None
    bearing = -target_box.center_u * (hfov / 2.0)
    reach = max(0.0, depth - standoff)
    ax, ay, heading = agent_pose
    ang = heading + bearing
    return (ax + reach * math.cos(ang), ay + reach * math.sin(ang))


class SafetyFilter:
    """Velocity-grid safety filter: rolls candidate (v, w) arcs against the
    lidar scan, rejects any whose swept path comes within the safety radius of
    a return, and picks the survivor closest to the request."""

    def __init__(self, config: PlannerConfig, v_max: float = 1.5, omega_max: float = 1.5):
        config.validate(v_max)
        self.config = config
        self.v_max = v_max
        self.omega_max = omega_max
        vs = np.linspace(0.0, v_max, config.n_linear)
        ws = np.linspace(-omega_max, omega_max, config.n_angular)
        cand = [(v, w) for v in vs for w in ws]
        self.candidates = np.array(cand)
        self._paths = np.stack([self._rollout(v, w) for v, w in cand])  # (C, K, 2)
        self._margins = np.array([
            v * self._horizon(v) / config.rollout_steps / 2.0 for v, _ in cand])
        self._cost_points = np.array([
            self._arc_point(v, w, min(config.control_horizon, self._horizon(v)))
            for v, w in cand])
        self._scan_dirs: np.ndarray | None = None

    def _horizon(self, v: float) -> float:
        if v <= 1e-9:
            return self.config.time_cap
        return min(self.config.lookahead / v, self.config.time_cap)

    def _rollout(self, v: float, w: float) -> np.ndarray:
        """Arc sample points in the agent frame, K steps over the horizon."""
        k = self.config.rollout_steps
        t = np.linspace(0.0, self._horizon(v), k + 1)[1:]
        if abs(w) < 1e-9:
            return np.column_stack([v * t, np.zeros(k)])
        return np.column_stack([v / w * np.sin(w * t), v / w * (1.0 - np.cos(w * t))])

    @staticmethod
    def _arc_point(v: float, w: float, t: float) -> tuple[float, float]:
        if abs(w) < 1e-9:
            return (v * t, 0.0)
        return (v / w * math.sin(w * t), v / w * (1.0 - math.cos(w * t)))

    def _scan_points(self, scan: LidarScan) -> np.ndarray:
        if self._scan_dirs is None or len(self._scan_dirs) != len(scan.angles):
            self._scan_dirs = np.column_stack([np.cos(scan.angles), np.sin(scan.angles)])
        relevant = self.config.lookahead + self.config.safety_radius + 0.5
        mask = np.isfinite(scan.ranges) & (scan.ranges < relevant)
        return self._scan_dirs[mask] * scan.ranges[mask, None]

    def _point_limits(self, points: np.ndarray, margins: np.ndarray) -> np.ndarray:
        """Required clearance per (candidate, point). A return already inside
        the safety radius (someone brushed past the robot) only requires the
        path not to come closer than it already is, so the filter can still
        drive away instead of freezing; all other returns keep the full
        safety radius."""
        base = self.config.safety_radius + margins[:, None]  # (C, 1) + broadcast
        dist_now = np.hypot(points[:, 0], points[:, 1])
        # never ratchet below the robot's own surface
        relax = np.maximum(dist_now - 0.02, 0.30)  # (M,)
        return np.minimum(base, relax[None, :])

    def safe_mask(self, points: np.ndarray) -> np.ndarray:
        """Per-candidate safety; v = 0 candidates sweep nothing and stay safe."""
        safe = np.ones(len(self.candidates), dtype=bool)
        moving = self.candidates[:, 0] > 1e-9
        if len(points) == 0:
            return safe
        d2 = ((self._paths[moving, :, None, :] - points[None, None, :, :]) ** 2).sum(-1)
        limit = self._point_limits(points, self._margins[moving])[:, None, :]
        safe[moving] = (d2 >= limit ** 2).all(axis=(1, 2))
        return safe

    def _path_is_safe(self, v: float, w: float, points: np.ndarray) -> bool:
        if v <= 1e-9 or len(points) == 0:
            return True
        path = self._rollout(v, w)
        margin = v * self._horizon(v) / self.config.rollout_steps / 2.0
        limit = self._point_limits(points, np.array([margin]))  # (1, M)
        d2 = ((path[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        return bool((d2 >= limit ** 2).all())

    def filter_command(self, command: ControlCommand, scan: LidarScan) -> ControlCommand:
        points = self._scan_points(scan)
        cmd = command.clamped(self.v_max, self.omega_max)
        if self._path_is_safe(cmd.linear_velocity, cmd.angular_velocity, points):
            return cmd
        safe = self.safe_mask(points)
        if not safe[self.candidates[:, 0] > 1e-9].any():
            return self._escape(scan)
        dv = (self.candidates[:, 0] - cmd.linear_velocity) / self.v_max
        dw = (self.candidates[:, 1] - cmd.angular_velocity) / self.omega_max
        cost = np.where(safe, dv * dv + dw * dw, np.inf)
        v, w = self.candidates[int(np.argmin(cost))]
        return ControlCommand(float(v), float(w))

    def filter_goal(self, goal: tuple[float, float],
                    agent_pose: tuple[float, float, float],
                    scan: LidarScan) -> ControlCommand:
        ax, ay, heading = agent_pose
        c, s = math.cos(-heading), math.sin(-heading)
        gx = c * (goal[0] - ax) - s * (goal[1] - ay)
        gy = s * (goal[0] - ax) + c * (goal[1] - ay)
        points = self._scan_points(scan)
        safe = self.safe_mask(points)
        if not safe[self.candidates[:, 0] > 1e-9].any() and math.hypot(gx, gy) > 0.2:
            return self._escape(scan)
        pts = self._cost_points
        dist = np.hypot(pts[:, 0] - gx, pts[:, 1] - gy)
        tau = np.minimum(self.config.control_horizon,
                         np.array([self._horizon(v) for v in self.candidates[:, 0]]))
        theta = self.candidates[:, 1] * tau
        to_goal = np.arctan2(gy - pts[:, 1], gx - pts[:, 0])
        misalign = np.abs(np.mod(theta - to_goal + math.pi, 2 * math.pi) - math.pi)
        cost = np.where(safe, dist + 0.3 * misalign, np.inf)
        v, w = self.candidates[int(np.argmin(cost))]
        return ControlCommand(float(v), float(w))

    def _escape(self, scan: LidarScan) -> ControlCommand:
        """No translating candidate survives: rotate toward the freest side."""
        left = scan.angles < math.pi
        ranges = np.where(np.isfinite(scan.ranges), scan.ranges, scan.max_range)
        sign = 1.0 if ranges[left].mean() >= ranges[~left].mean() else -1.0
        return ControlCommand(0.0, sign * self.omega_max)


def safer_filter(command_or_goal, scan: LidarScan, config: PlannerConfig,
                 agent_pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
                 v_max: float = 1.5, omega_max: float = 1.5) -> ControlCommand:
    """Functional entry point: pass a ControlCommand or an (x, y) goal."""
    filt = SafetyFilter(config, v_max=v_max, omega_max=omega_max)
    if isinstance(command_or_goal, ControlCommand):
        return filt.filter_command(command_or_goal, scan)
    return filt.filter_goal(tuple(command_or_goal), agent_pose, scan)


def naive_goal_command(goal: tuple[float, float],
                       agent_pose: tuple[float, float, float],
                       v_max: float = 1.5, omega_max: float = 1.5) -> ControlCommand:
    """Direct go-to-goal used when path planning is ablated."""
    ax, ay, heading = agent_pose
    dx, dy = goal[0] - ax, goal[1] - ay
    dist = math.hypot(dx, dy)
    if dist < 0.1:
        return STOP
    err = wrap_angle(math.atan2(dy, dx) - heading)
    omega = min(omega_max, max(-omega_max, 2.0 * err))
    v = min(v_max, 1.5 * dist) * max(0.0, math.cos(err))
    return ControlCommand(v, omega)


@dataclass
class TickInfo:
    fresh: bool
    mode: str
    camera: str
    command: ControlCommand
    reid_invoked: bool = False
    followed_truth: int | None = None
    n_detections: int = 0


class FollowPipeline:
    """Per-tick perception + control with the re-id latency model.

    Frames that only run the tracker cost one tick; a frame that invokes the
    re-id module stalls perception for the following REID_STALL_TICKS ticks,
    during which the last command is held.
    """

    def __init__(self, sensors: dict[str, Sensor], bank: FeatureBank | None,
                 use_motion_tracker: bool = True,
                 use_torso_id: bool = True, use_face_id: bool = True,
                 use_visual_servo: bool = True, use_path_planning: bool = True,
                 switch_config: CameraSwitchConfig | None = None,
                 servo_config: ServoConfig | None = None,
                 search_config: SearchConfig | None = None,
                 planner_config: PlannerConfig | None = None,
                 tracker: Tracker | None = None,
                 v_max: float = 1.5, omega_max: float = 1.5,
                 reid_config: ReidConfig | None = None):
        self.sensors = sensors
        self.bank = bank
        self.use_motion_tracker = use_motion_tracker
        self.use_torso_id = use_torso_id and bank is not None
        self.use_face_id = use_face_id and bank is not None
        self.use_visual_servo = use_visual_servo
        self.use_path_planning = use_path_planning
        self.switch_config = switch_config or CameraSwitchConfig()
        self.servo_config = servo_config or ServoConfig()
        self.search_config = search_config or SearchConfig()
        self.planner_config = planner_config or PlannerConfig()
        self.reid_config = reid_config or ReidConfig()
        self.v_max = v_max
        self.omega_max = omega_max
        if not use_motion_tracker:
            self.tracker = None
        else:
            self.tracker = tracker if tracker is not None else Tracker()
        self.planner = SafetyFilter(self.planner_config, v_max, omega_max) \
            if use_path_planning else None
        self.state = FollowState(camera="rgbd")
        self.tick_index = 0
        self._stall = 0
        self._ticks_since_fresh = 0
        self._last_command = STOP
        self._held_truth: int | None = None
        self._pending_acquire: tuple | None = None
        self.detection_sink: list | None = None  # optional per-frame dump
        self.reid_calls = 0
        self.fresh_frames = 0
        self.tick_rate = 30.0

    # --- helpers ---

    def _reid_enabled(self) -> bool:
        return self.bank is not None and (self.use_torso_id or self.use_face_id)

    def _hfov(self, camera: str) -> float:
        return self.sensors[camera].camera.horizontal_fov

    def _entry_camera(self, det: Detection) -> str:
        """Camera mode after (re)acquisition, by the quoted thresholds."""
        if not self.use_visual_servo:
            return "rgbd"
        if det.camera == "rgbd":
            return "fisheye" if (det.depth is not None
                                 and det.depth < self.switch_config.to_fisheye_distance) else "rgbd"
        return "fisheye" if det.body_box.height >= self.switch_config.to_rgbd_height_frac else "rgbd"

    def _note_seen(self, box: BoundingBox, camera: str, depth: float | None,
                   agent_pose) -> None:
        st = self.state
        st.last_seen_bearing = -box.center_u * (self._hfov(camera) / 2.0)
        st.last_seen_center = (box.center_u, box.center_v)
        if depth is not None and math.isfinite(depth):
            goal = goal_from_depth(box, depth, agent_pose, self._hfov(camera),
                                   self.servo_config.standoff)
            if goal is not None:
                st.last_seen_goal = goal

    def _target_distance(self, box: BoundingBox, depth: float | None,
                         camera: str) -> float | None:
        if depth is not None and math.isfinite(depth):
            return depth
        if box.height > 1e-6:
            cam = self.sensors[camera].camera
            return cam.focal * 1.7 / box.height
        return None

    def _yield_command(self, box: BoundingBox, dist: float, scan: LidarScan) -> ControlCommand:
        """Back away slowly from a person inside the personal space while the
        rear stays clear; otherwise hold position and keep facing them."""
        rear = np.abs(np.mod(scan.angles - math.pi, 2 * math.pi) - math.pi) < 1.05
        rear_clear = scan.ranges[rear]
        rear_min = float(np.min(np.where(np.isfinite(rear_clear), rear_clear,
                                         scan.max_range))) if rear.any() else 0.0
        omega = -self.servo_config.k_yaw * box.center_u
        if rear_min <= 0.8:
            return ControlCommand(0.0, omega)
        omega = min(0.3, max(-0.3, omega))  # back off straight-ish
        return ControlCommand(-0.3, omega)

    def _drive(self, box: BoundingBox, depth: float | None, camera: str,
               agent_pose, scan: LidarScan) -> ControlCommand:
        dist = self._target_distance(box, depth, camera)
        if dist is not None and dist < self.servo_config.yield_distance:
            return self._yield_command(box, dist, scan)
        if self.use_visual_servo and camera == "fisheye":
            cmd = visual_servo(box, self.servo_config, self.v_max)
            return self.planner.filter_command(cmd, scan) if self.planner else cmd
        goal = None
        if depth is not None and math.isfinite(depth):
            goal = goal_from_depth(box, depth, agent_pose, self._hfov(camera),
                                   self.servo_config.standoff)
        if goal is None:
            goal = self.state.last_seen_goal
        if goal is None:
            return STOP
        if self.planner:
            return self.planner.filter_goal(goal, agent_pose, scan)
        return naive_goal_command(goal, agent_pose, self.v_max, self.omega_max)

    def _enter_search(self) -> None:
        st = self.state
        st.target_track_id = None
        if st.search_started_at is None:
            st.search_started_at = self.tick_index
            st.spin_sign = 1.0 if st.last_seen_bearing >= 0.0 else -1.0

    def _search_command(self, agent_pose, scan: LidarScan) -> ControlCommand:
        st = self.state
        held = (self.tick_index - (st.search_started_at or self.tick_index)) / self.tick_rate
        if (st.camera == "rgbd" and st.last_seen_goal is not None
                and held <= self.search_config.goal_hold):
            if self.planner:
                return self.planner.filter_goal(st.last_seen_goal, agent_pose, scan)
            return naive_goal_command(st.last_seen_goal, agent_pose,
                                      self.v_max, self.omega_max)
        return ControlCommand(0.0, st.spin_sign * self.search_config.search_spin_rate)

    # --- the per-tick entry point ---

    def tick(self, world: World, scan: LidarScan | None = None) -> TickInfo:
        """Advance perception/control by one world tick and return the command."""
        self.tick_index += 1
        if self._stall > 0:
            self._stall -= 1
            self._ticks_since_fresh += 1
            return TickInfo(fresh=False, mode=self.state.mode, camera=self.state.camera,
                            command=self._last_command,
                            followed_truth=self._held_truth)
        info = self._fresh_frame(world, scan if scan is not None else world.lidar_scan())
        self._last_command = info.command
        self._held_truth = info.followed_truth
        if info.reid_invoked:
            self._stall = REID_STALL_TICKS
        self._ticks_since_fresh = 0
        return info

    def _fresh_frame(self, world: World, scan: LidarScan) -> TickInfo:
        self.fresh_frames += 1
        st = self.state
        agent_pose = (*world.agent.position, world.agent.heading)
        dt = self._ticks_since_fresh + 1

        bound_needs_reid = True
        detections = self.sensors[st.camera].render(world)
        if self.detection_sink is not None:
            self.detection_sink.append((self.tick_index, st.camera, list(detections)))
        tracks = self.tracker.step(detections, dt=dt) if self.tracker else []

        # (1) bound target still live and confirmed: follow it, no re-id
        if st.target_track_id is not None and self.tracker is not None:
            tr = next((t for t in tracks if t.id == st.target_track_id), None)
            if tr is not None:
                bound_needs_reid = False
                fresh_det = tr.last_detection if tr.time_since_update == 0 else None
                depth = fresh_det.depth if fresh_det is not None else None
                box = tr.box
                self._note_seen(box, st.camera, depth, agent_pose)
                st.search_started_at = None
                cmd = self._drive(box, depth, st.camera, agent_pose, scan)
                truth = tr.last_detection.truth_id if tr.last_detection else None
                self._maybe_switch(box.height, depth)
                return TickInfo(fresh=True, mode=st.mode, camera=st.camera, command=cmd,
                                followed_truth=truth, n_detections=len(detections))

        # (2) target lost: re-identify among current detections
        if self._reid_enabled() and bound_needs_reid:
            cands, cand_tracks = self._reid_candidates(world, detections, tracks)
            self.reid_calls += 1
            hit = reidentify([c for c in cands], self.bank, self.reid_config,
                             last_center=st.last_seen_center,
                             track_ids=[t.id if t else None for t in cand_tracks],
                             use_face=self.use_face_id, use_torso=self.use_torso_id)
            if hit is not None:
                idx, _score = hit
                det = cands[idx]
                tr = cand_tracks[idx]
                if self._confirm_acquisition(det, tr, agent_pose[2]):
                    new_cam = self._entry_camera(det)
                    if new_cam != st.camera:
                        if self.tracker:
                            self.tracker.reset()
                        st.target_track_id = None
                    else:
                        st.target_track_id = tr.id if tr is not None else None
                    st.camera = new_cam
                    st.search_started_at = None
                    self._note_seen(det.body_box, det.camera, det.depth, agent_pose)
                    cmd = self._drive(det.body_box, det.depth, det.camera, agent_pose, scan)
                    return TickInfo(fresh=True, mode=st.mode, camera=st.camera, command=cmd,
                                    reid_invoked=True, followed_truth=det.truth_id,
                                    n_detections=len(cands))
            else:
                self._pending_acquire = None
            self._enter_search()
            cmd = self._search_command(agent_pose, scan)
            return TickInfo(fresh=True, mode=SEARCH, camera=st.camera, command=cmd,
                            reid_invoked=True, n_detections=len(cands))

        # (3) no re-id models: follow the nearest tracked person
        if not self._reid_enabled():
            pick, tr = self._nearest_candidate(detections, tracks)
            if pick is not None:
                st.target_track_id = tr.id if tr is not None else None
                st.search_started_at = None
                self._note_seen(pick.body_box, st.camera, pick.depth, agent_pose)
                cmd = self._drive(pick.body_box, pick.depth, st.camera, agent_pose, scan)
                self._maybe_switch(pick.body_box.height, pick.depth)
                return TickInfo(fresh=True, mode=st.mode, camera=st.camera, command=cmd,
                                followed_truth=pick.truth_id, n_detections=len(detections))

        self._enter_search()
        cmd = self._search_command(agent_pose, scan)
        return TickInfo(fresh=True, mode=SEARCH, camera=st.camera, command=cmd,
                        n_detections=len(detections))

    def _maybe_switch(self, box_height: float | None, depth: float | None) -> None:
        """Evaluate the mode-local trigger; on switch, reset tracking for re-acquisition."""
        if not self.use_visual_servo:
            return
        st = self.state
        new_cam = select_camera(st.camera, box_height, depth, self.switch_config)
        if new_cam != st.camera:
            st.camera = new_cam
            st.target_track_id = None
            if self.tracker:
                self.tracker.reset()

    def _confirm_acquisition(self, det: Detection, tr, agent_heading: float) -> bool:
        """A match binds only after winning two consecutive re-id frames at a
        consistent world bearing, so a single noise spike in an imposter's
        similarity cannot capture the controller. World frame matters: the
        agent itself rotates while searching."""
        bearing = wrap_angle(agent_heading
                             - det.body_box.center_u * (self._hfov(det.camera) / 2.0))
        pending = self._pending_acquire
        self._pending_acquire = (bearing, self.tick_index)
        if pending is None:
            return False
        prev_bearing, prev_tick = pending
        if self.tick_index - prev_tick > 2 * (REID_STALL_TICKS + 1):
            return False
        return abs(wrap_angle(bearing - prev_bearing)) <= 0.25

    def _reid_candidates(self, world: World, detections: list[Detection],
                         tracks) -> tuple[list[Detection], list]:
        """Detections offered to re-id, each with its track (or None).

        While unbound the other camera is scanned too, so a target beyond the
        active camera's range can still be re-acquired.
        """
        det_to_track = {}
        if self.tracker:
            for t in self.tracker.tracks:
                if t.time_since_update == 0 and t.last_detection is not None:
                    det_to_track[id(t.last_detection)] = t
        cands = list(detections)
        cand_tracks = [det_to_track.get(id(d)) for d in detections]
        other = "fisheye" if self.state.camera == "rgbd" else "rgbd"
        if other in self.sensors and self.use_visual_servo:
            for det in self.sensors[other].render(world):
                cands.append(det)
                cand_tracks.append(None)
        return cands, cand_tracks

    def _nearest_candidate(self, detections: list[Detection], tracks):
        """No-re-id baseline: the confirmed track nearest the last seen image
        position (largest box when nothing was ever seen)."""
        fresh = [(t.last_detection, t) for t in tracks
                 if t.time_since_update == 0 and t.last_detection is not None]
        if self.tracker is None:
            fresh = [(d, None) for d in detections]
        if not fresh:
            return None, None
        last = self.state.last_seen_center
        if last is None:
            return max(fresh, key=lambda pair: pair[0].body_box.height)
        return min(fresh, key=lambda pair: math.hypot(
            pair[0].body_box.center_u - last[0], pair[0].body_box.center_v - last[1]))
