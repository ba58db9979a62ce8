"""SORT-style multi-object tracker: per-track Kalman filter over box state,
IoU association via the Hungarian algorithm, and id lifecycle management."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .sensing import BoundingBox, Detection, iou

log = logging.getLogger(__name__)

# state: [u, v, s, r, du, dv, ds] with s = area, r = aspect (width/height)
DIM_X = 7
DIM_Z = 4


@dataclass
class TrackerConfig:
    iou_match_min: float = 0.3
    max_age: int = 10
    min_hits: int = 3
    process_noise: float = 1.0      # scale on Q
    measurement_noise: float = 1.0  # scale on R

    def __post_init__(self):
        if not 0.0 < self.iou_match_min < 1.0:
            raise ValueError("iou_match_min must lie in (0, 1)")
        if self.max_age <= 0 or self.min_hits <= 0:
            raise ValueError("max_age and min_hits must be positive")


def make_f(dt: float = 1.0) -> np.ndarray:
    f = np.eye(DIM_X)
    f[0, 4] = f[1, 5] = f[2, 6] = dt
    return f


H = np.zeros((DIM_Z, DIM_X))
H[0, 0] = H[1, 1] = H[2, 2] = H[3, 3] = 1.0

# Base noise levels tuned for unit-square image coordinates at 30 Hz.
Q_BASE = np.diag([1e-4, 1e-4, 1e-5, 1e-8, 2.5e-5, 2.5e-5, 1e-6])
R_BASE = np.diag([1e-4, 1e-4, 1e-4, 1e-4])
P0_BASE = np.diag([1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e-3])


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray


def box_to_z(box: BoundingBox) -> np.ndarray:
    s = box.height * box.width
    r = box.width / box.height
    return np.array([box.center_u, box.center_v, s, r])


def z_to_box(z: np.ndarray) -> BoundingBox:
    s = max(z[2], 1e-8)
    r = max(z[3], 1e-6)
    w = math.sqrt(s * r)
    h = s / w
    return BoundingBox(center_u=z[0], center_v=z[1], height=h, width=w)


def kf_init(box: BoundingBox, config: TrackerConfig) -> KalmanState:
    mean = np.zeros(DIM_X)
    mean[:4] = box_to_z(box)
    return KalmanState(mean=mean, covariance=P0_BASE.copy())


def kf_predict(state: KalmanState, dt: float = 1.0,
               config: TrackerConfig | None = None) -> KalmanState:
    """Constant-velocity prediction; aspect ratio carries no velocity."""
    q_scale = config.process_noise if config else 1.0
    f = make_f(dt)
    mean = f @ state.mean
    cov = f @ state.covariance @ f.T + Q_BASE * q_scale * dt
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def kf_update(state: KalmanState, measurement: BoundingBox,
              config: TrackerConfig | None = None,
              r: np.ndarray | None = None) -> KalmanState:
    """Standard Kalman gain update on (u, v, s, r). Non-finite measurements are
    rejected: the state is returned unchanged and an error is logged."""
    z = box_to_z(measurement)
    if not np.all(np.isfinite(z)):
        log.error("rejecting non-finite measurement %s", z)
        return state
    r_mat = r if r is not None else R_BASE * (config.measurement_noise if config else 1.0)
    p = state.covariance
    innovation = z - H @ state.mean
    s_mat = H @ p @ H.T + r_mat
    gain = p @ H.T @ np.linalg.solve(s_mat, np.eye(DIM_Z))
    mean = state.mean + gain @ innovation
    ikh = np.eye(DIM_X) - gain @ H
    cov = ikh @ p @ ikh.T + gain @ r_mat @ gain.T  # Joseph form keeps PSD
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


@dataclass
class Track:
    id: int
    state: KalmanState
    hits: int = 1
    time_since_update: int = 0
    age: int = 0
    last_detection: Detection | None = None

    @property
    def box(self) -> BoundingBox:
        return z_to_box(self.state.mean[:4])


def associate(tracks: list[BoundingBox], detections: list[BoundingBox],
              iou_match_min: float) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Assignment maximizing total IoU; pairs below the threshold are dropped.

    Returns (matched (track_idx, det_idx) pairs, unmatched track indices,
    unmatched detection indices).
    """
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))
    mat = np.zeros((len(tracks), len(detections)))
    for ti, tb in enumerate(tracks):
        for di, db in enumerate(detections):
            mat[ti, di] = iou(tb, db)
    rows, cols = linear_sum_assignment(-mat)
    matched = []
    for ti, di in zip(rows, cols):
        if mat[ti, di] < iou_match_min:
            continue
        matched.append((int(ti), int(di)))
    matched_t = {t for t, _ in matched}
    matched_d = {d for _, d in matched}
    return (matched,
            [i for i in range(len(tracks)) if i not in matched_t],
            [i for i in range(len(detections)) if i not in matched_d])


class Tracker:
    """Single-camera tracker; one step() call per perception frame."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self.frame_count = 0

    def reset(self) -> None:
        """Drop all tracks, e.g. on a camera switch. Ids are never reused."""
        self.tracks = []
        self.frame_count = 0

    def step(self, detections: list[Detection], dt: int = 1) -> list[Track]:
        """Predict, associate, update, manage lifecycle; returns confirmed tracks."""
        self.frame_count += 1
        cfg = self.config
        dets = [d for d in detections if np.all(np.isfinite(box_to_z(d.body_box)))]
        if len(dets) != len(detections):
            log.error("dropping %d non-finite detections", len(detections) - len(dets))

        for tr in self.tracks:
            tr.state = kf_predict(tr.state, dt=float(dt), config=cfg)
            tr.age += dt
            tr.time_since_update += dt

        matched, _, unmatched_d = associate(
            [t.box for t in self.tracks], [d.body_box for d in dets], cfg.iou_match_min)
        for ti, di in matched:
            tr = self.tracks[ti]
            tr.state = kf_update(tr.state, dets[di].body_box, config=cfg)
            tr.hits += 1
            tr.time_since_update = 0
            tr.last_detection = dets[di]
        for di in unmatched_d:
            self.tracks.append(Track(
                id=self._next_id, state=kf_init(dets[di].body_box, cfg),
                last_detection=dets[di]))
            self._next_id += 1

        self.tracks = [t for t in self.tracks if t.time_since_update <= cfg.max_age]
        return self.confirmed()

    def confirmed(self) -> list[Track]:
        return [t for t in self.tracks
                if t.hits >= self.config.min_hits
                or (t.time_since_update == 0 and self.frame_count <= self.config.min_hits)]

    def get(self, track_id: int) -> Track | None:
        return next((t for t in self.tracks if t.id == track_id), None)
