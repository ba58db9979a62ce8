"""Synthetic perception: body/face boxes and appearance embeddings from world state.

Stands in for the real detector + embedding stack so the tracking,
re-identification, and control layers see realistic, reproducible inputs.
The image is treated as a unit square: u and v in [-1, 1] with (0, 0) at the
center, heights and widths as fractions of the image side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    point_segment_distance,
    segment_intersects_circle,
    segment_intersects_rect,
    wrap_angle,
)
from .world import PERSON_RADIUS, PersonState, World

EMBED_DIM = 64
FACE_VIEW_LIMIT = math.pi / 2  # face detectable iff |view angle| strictly below
MIN_FACE_HEIGHT = 0.02
FACE_MATCH_IOU = 0.75  # assignment requires IoU strictly greater

TORSO_TOP = 0.20   # torso band within the body box, measured from the top
TORSO_BOTTOM = 0.55
TORSO_WIDTH_RATIO = 0.60
FACE_SIDE_RATIO = 0.15
BODY_ASPECT = 0.35  # body box width as a fraction of its height


@dataclass
class CameraModel:
    kind: str  # "fisheye" | "rgbd"
    horizontal_fov: float
    max_range: float
    provides_depth: bool
    focal: float  # apparent height = focal * person_height / distance
    depth_noise: float = 0.03

    @classmethod
    def fisheye(cls, **kw) -> "CameraModel":
        return cls(kind="fisheye", horizontal_fov=math.radians(200.0), max_range=3.0,
                   provides_depth=False, focal=0.5, **kw)

    @classmethod
    def rgbd(cls, **kw) -> "CameraModel":
        return cls(kind="rgbd", horizontal_fov=math.radians(70.0), max_range=8.0,
                   provides_depth=True, focal=1.0, **kw)


@dataclass(frozen=True)
class BoundingBox:
    center_u: float
    height: float
    width: float
    center_v: float = 0.0

    def corners(self) -> tuple[float, float, float, float]:
        """(u0, v0, u1, v1) with u along the horizontal axis."""
        hw, hh = self.width / 2.0, self.height / 2.0
        return (self.center_u - hw, self.center_v - hh, self.center_u + hw, self.center_v + hh)

    @property
    def area(self) -> float:
        return self.height * self.width


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray

    def __post_init__(self):
        n = float(np.linalg.norm(self.values))
        if abs(n - 1.0) > 1e-6:
            object.__setattr__(self, "values", self.values / n)


@dataclass
class Detection:
    body_box: BoundingBox
    torso_box: BoundingBox
    torso_embedding: Embedding
    face_box: BoundingBox | None = None
    face_embedding: Embedding | None = None
    depth: float | None = None
    truth_id: int = -1  # simulator-only ground truth; never read by the pipeline
    camera: str = ""


@dataclass
class IdentityProfile:
    """Synthetic appearance: orthonormal identity vectors plus a view basis."""

    face_identity: np.ndarray
    torso_identity: np.ndarray
    view_front: np.ndarray
    view_side: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, dim: int = EMBED_DIM) -> "IdentityProfile":
        rng = np.random.default_rng([int(seed), 7])
        raw = rng.standard_normal((dim, 4))
        q, r = np.linalg.qr(raw)
        q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for reproducibility
        return cls(q[:, 0].copy(), q[:, 1].copy(), q[:, 2].copy(), q[:, 3].copy())


@dataclass
class SensorNoise:
    p_miss: float = 0.05
    box_jitter: float = 0.01     # sigma relative to the box height
    view_alpha: float = 0.4
    embed_noise: float = 0.1     # expected total noise norm, E||eps||^2 = sigma^2
    dim: int = EMBED_DIM


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 for degenerate or disjoint boxes."""
    if a.area <= 0.0 or b.area <= 0.0:
        return 0.0
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def synth_embedding(profile: IdentityProfile, part: str, view_angle: float,
                    rng: np.random.Generator, noise: SensorNoise | None = None) -> Embedding:
    """Identity vector plus a view-dependent component plus isotropic noise.

    The side component scales with |sin| of the view angle: left and right
    profiles of the same person look alike, which is what lets a full-turn
    registration outscore a front/back-only one on side views.
    """
    noise = noise or SensorNoise()
    identity = profile.face_identity if part == "face" else profile.torso_identity
    e = identity + noise.view_alpha * (
        math.cos(view_angle) * profile.view_front
        + abs(math.sin(view_angle)) * profile.view_side
    )
    if noise.embed_noise > 0.0:
        e = e + rng.standard_normal(noise.dim) * (noise.embed_noise / math.sqrt(noise.dim))
    return Embedding(e / np.linalg.norm(e))


def pose_boxes(body_box: BoundingBox, view_angle: float,
               rng: np.random.Generator | None = None) -> tuple[BoundingBox | None, BoundingBox]:
    """Face and torso boxes induced from the body box by the (synthetic) pose.

    The torso band stays accurate regardless of view angle. The face box is a
    square at the head, displaced by up to half its width when the person
    faces away, since pose keypoints misplace unseen faces.
    """
    h, w = body_box.height, body_box.width
    top = body_box.center_v + h / 2.0
    torso = BoundingBox(
        center_u=body_box.center_u,
        center_v=top - (TORSO_TOP + TORSO_BOTTOM) / 2.0 * h,
        height=(TORSO_BOTTOM - TORSO_TOP) * h,
        width=TORSO_WIDTH_RATIO * w,
    )
    side = FACE_SIDE_RATIO * h
    fu, fv = body_box.center_u, top - side / 2.0
    if abs(view_angle) > math.pi / 2 and rng is not None:
        fu += rng.uniform(-0.5, 0.5) * side
        fv += rng.uniform(-0.5, 0.5) * side
    face = BoundingBox(center_u=fu, center_v=fv, height=side, width=side)
    return face, torso


def synth_face(person: PersonState, view_angle: float, body_box: BoundingBox,
               profile: IdentityProfile, rng: np.random.Generator,
               noise: SensorNoise) -> tuple[BoundingBox, Embedding] | None:
    """Detected face box + embedding, present only when facing the camera."""
    side = FACE_SIDE_RATIO * body_box.height
    if abs(view_angle) >= FACE_VIEW_LIMIT or side <= MIN_FACE_HEIGHT:
        return None
    jit = noise.box_jitter * side
    box = BoundingBox(
        center_u=body_box.center_u + rng.normal(0.0, jit),
        center_v=body_box.center_v + body_box.height / 2.0 - side / 2.0 + rng.normal(0.0, jit),
        height=max(1e-4, side + rng.normal(0.0, jit)),
        width=max(1e-4, side + rng.normal(0.0, jit)),
    )
    return box, synth_embedding(profile, "face", view_angle, rng, noise)


def match_faces_to_bodies(face_boxes: list[BoundingBox],
                          pose_face_boxes: list[BoundingBox]) -> dict[int, int]:
    """Greedy best-IoU assignment of detected faces to bodies.

    Returns {body_index: face_index}; only pairs with IoU strictly above
    FACE_MATCH_IOU are assigned, the rest of the faces are discarded.
    """
    pairs = []
    for fi, fb in enumerate(face_boxes):
        for bi, pb in enumerate(pose_face_boxes):
            v = iou(fb, pb)
            if v > FACE_MATCH_IOU:
                pairs.append((v, fi, bi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_f, used_b, assignment = set(), set(), {}
    for v, fi, bi in pairs:
        if fi in used_f or bi in used_b:
            continue
        used_f.add(fi)
        used_b.add(bi)
        assignment[bi] = fi
    return assignment


@dataclass
class Sensor:
    """One camera's view of the world; owns its RNG substream."""

    camera: CameraModel
    profiles: dict[int, IdentityProfile]
    noise: SensorNoise = field(default_factory=SensorNoise)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def render(self, world: World) -> list[Detection]:
        return render_detections(self.camera, world, self.profiles, self.rng, self.noise)


def _occluded(world: World, person: PersonState) -> bool:
    ax, ay = world.agent.position
    px, py = person.position
    for ob in world.config.obstacles:
        if ob.is_circle:
            if segment_intersects_circle(ax, ay, px, py, *ob.shape):
                return True
        elif segment_intersects_rect(ax, ay, px, py, *ob.shape):
            return True
    dist = math.hypot(px - ax, py - ay)
    for other in world.persons:
        if other.id == person.id:
            continue
        od = math.hypot(other.position[0] - ax, other.position[1] - ay)
        if od < dist and point_segment_distance(
                other.position[0], other.position[1], ax, ay, px, py) < 0.3:
            return True
    return False


def render_detections(camera: CameraModel, world: World,
                      profiles: dict[int, IdentityProfile],
                      rng: np.random.Generator,
                      noise: SensorNoise | None = None) -> list[Detection]:
    """Detections for every visible, unoccluded person in this camera."""
    noise = noise or SensorNoise()
    ax, ay = world.agent.position
    heading = world.agent.heading

    bodies: list[Detection] = []
    pose_faces: list[BoundingBox] = []
    detected_faces: list[tuple[BoundingBox, Embedding]] = []
    face_owner_truth: list[int] = []

    for person in sorted(world.persons, key=lambda p: p.id):
        px, py = person.position
        dist = math.hypot(px - ax, py - ay)
        if dist <= 1e-6 or dist > camera.max_range:
            continue
        bearing = wrap_angle(math.atan2(py - ay, px - ax) - heading)
        if abs(bearing) > camera.horizontal_fov / 2.0:
            continue
        if _occluded(world, person):
            continue
        if rng.random() < noise.p_miss:
            continue
        h_true = min(1.0, camera.focal * person.height / dist)
        jit = noise.box_jitter * h_true
        body = BoundingBox(
            center_u=min(1.0, max(-1.0, -bearing / (camera.horizontal_fov / 2.0)
                                  + rng.normal(0.0, jit))),
            center_v=rng.normal(0.0, jit),
            height=min(1.0, max(1e-3, h_true + rng.normal(0.0, jit))),
            width=max(1e-3, BODY_ASPECT * h_true + rng.normal(0.0, jit)),
        )
        view_angle = wrap_angle(math.atan2(ay - py, ax - px) - person.heading)
        pose_face, torso = pose_boxes(body, view_angle, rng)
        profile = profiles[person.id]
        det = Detection(
            body_box=body,
            torso_box=torso,
            torso_embedding=synth_embedding(profile, "torso", view_angle, rng, noise),
            depth=(dist + rng.normal(0.0, camera.depth_noise)
                   if camera.provides_depth else None),
            truth_id=person.id,
            camera=camera.kind,
        )
        bodies.append(det)
        pose_faces.append(pose_face)
        got = synth_face(person, view_angle, body, profile, rng, noise)
        if got is not None:
            detected_faces.append(got)
            face_owner_truth.append(person.id)

    assignment = match_faces_to_bodies([fb for fb, _ in detected_faces], pose_faces)
    for bi, fi in assignment.items():
        bodies[bi].face_box, bodies[bi].face_embedding = detected_faces[fi]
    return bodies
