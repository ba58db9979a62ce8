"""Target registration, feature bank, and the re-identification decision.

A registered target is represented by up to 100 face and 100 torso unit
embeddings. Matching compares a detection's embeddings against the normalized
bank means by cosine similarity; the score is the max over available parts and
a person is accepted only strictly above the similarity threshold.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sensing import Detection, Embedding

BANK_MAGIC = b"FBNK"
BANK_VERSION = 1
SAMPLE_CAP = 100


class RegistrationError(RuntimeError):
    """Raised when a registration stream yields no usable torso samples."""


@dataclass
class ReidConfig:
    sim_threshold: float = 0.8  # strict: accept only score > threshold

    def __post_init__(self):
        if not 0.0 < self.sim_threshold < 1.0:
            raise ValueError("sim_threshold must lie in (0, 1)")


@dataclass
class RegistrationConfig:
    mode: str = "full_360"  # "full_360" | "standard"
    duration: float = 20.0
    sample_cap: int = SAMPLE_CAP
    rng_seed: int = 0
    standard_tolerance: float = math.radians(30.0)

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.sample_cap < 1:
            raise ValueError("sample_cap must be >= 1")
        if self.mode not in ("full_360", "standard"):
            raise ValueError(f"unknown registration mode {self.mode!r}")


@dataclass
class SimilarityReport:
    torso_sim: float
    face_sim: float | None = None

    @property
    def score(self) -> float:
        if self.face_sim is not None and self.face_sim >= self.torso_sim:
            return self.face_sim
        return self.torso_sim


def bank_mean(part: list[Embedding]) -> np.ndarray:
    """Normalized arithmetic mean of a bank part; errors on an empty part."""
    if not part:
        raise ValueError("cannot take the mean of an empty bank part")
    m = np.mean([e.values for e in part], axis=0)
    n = np.linalg.norm(m)
    if n == 0.0:
        raise ValueError("bank mean is the zero vector")
    return m / n


def cosine_similarity(a: Embedding | np.ndarray, b: Embedding | np.ndarray) -> float:
    """Dot product of unit vectors; rejects inputs off the unit sphere."""
    va = a.values if isinstance(a, Embedding) else np.asarray(a, dtype=float)
    vb = b.values if isinstance(b, Embedding) else np.asarray(b, dtype=float)
    for v in (va, vb):
        if abs(np.linalg.norm(v) - 1.0) > 1e-3:
            raise ValueError("cosine_similarity expects unit vectors")
    return float(np.dot(va, vb))


@dataclass
class FeatureBank:
    torso_bank: list[Embedding]
    face_bank: list[Embedding] = field(default_factory=list)
    mode: str = "full_360"
    torso_mean: np.ndarray = field(init=False)
    face_mean: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        if not self.torso_bank:
            raise RegistrationError("registration collected no torso embeddings")
        self.torso_mean = bank_mean(self.torso_bank)
        self.face_mean = bank_mean(self.face_bank) if self.face_bank else None

    @property
    def dim(self) -> int:
        return len(self.torso_mean)

    def save(self, path: str | Path) -> None:
        """Little-endian binary: magic, version, dim, counts, mode, float64 vectors."""
        path = Path(path)
        mode_b = self.mode.encode("utf-8")
        with path.open("wb") as f:
            f.write(BANK_MAGIC)
            f.write(struct.pack("<IIIII", BANK_VERSION, self.dim,
                                len(self.face_bank), len(self.torso_bank), len(mode_b)))
            f.write(mode_b)
            for bank in (self.face_bank, self.torso_bank):
                for e in bank:
                    f.write(np.asarray(e.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "FeatureBank":
        raw = Path(path).read_bytes()
        if raw[:4] != BANK_MAGIC:
            raise ValueError(f"{path}: not a feature bank file")
        version, dim, n_face, n_torso, mode_len = struct.unpack_from("<IIIII", raw, 4)
        if version != BANK_VERSION:
            raise ValueError(f"{path}: unsupported bank version {version}")
        off = 24
        mode = raw[off:off + mode_len].decode("utf-8")
        off += mode_len
        vecs = np.frombuffer(raw, dtype="<f8", offset=off, count=(n_face + n_torso) * dim)
        vecs = vecs.reshape(n_face + n_torso, dim)
        face = [Embedding(v.copy()) for v in vecs[:n_face]]
        torso = [Embedding(v.copy()) for v in vecs[n_face:]]
        return cls(torso_bank=torso, face_bank=face, mode=mode)


def register_target(stream, config: RegistrationConfig) -> FeatureBank:
    """Collect embeddings over a registration stream, then keep a uniform
    seeded sample of up to sample_cap per part.

    `stream` yields per-frame Detection objects (or None for missed frames)
    of the single person being registered.
    """
    faces: list[Embedding] = []
    torsos: list[Embedding] = []
    for det in stream:
        if det is None:
            continue
        torsos.append(det.torso_embedding)
        if det.face_embedding is not None:
            faces.append(det.face_embedding)
    if not torsos:
        raise RegistrationError("registration collected no torso embeddings")
    rng = np.random.default_rng([config.rng_seed, 11])
    return FeatureBank(
        torso_bank=_subsample(torsos, config.sample_cap, rng),
        face_bank=_subsample(faces, config.sample_cap, rng),
        mode=config.mode,
    )


def _subsample(items: list, cap: int, rng: np.random.Generator) -> list:
    if len(items) <= cap:
        return list(items)
    idx = rng.choice(len(items), size=cap, replace=False)
    return [items[i] for i in sorted(idx)]


def score_person(detection: Detection, bank: FeatureBank,
                 use_face: bool = True, use_torso: bool = True) -> SimilarityReport:
    """Cosine similarities against the bank means; score is the max available.

    The part flags let ablations drop the face or torso route; at least one
    route must remain.
    """
    if not use_face and not use_torso:
        raise ValueError("at least one of face/torso must be enabled")
    face_sim = None
    if use_face and detection.face_embedding is not None and bank.face_mean is not None:
        face_sim = cosine_similarity(detection.face_embedding, bank.face_mean)
    if use_torso:
        torso_sim = cosine_similarity(detection.torso_embedding, bank.torso_mean)
    else:
        torso_sim = -1.0  # disabled route can never win the max
    return SimilarityReport(torso_sim=torso_sim, face_sim=face_sim)


def reidentify(detections: list[Detection], bank: FeatureBank,
               config: ReidConfig | None = None,
               last_center: tuple[float, float] | None = None,
               track_ids: list[int | None] | None = None,
               use_face: bool = True, use_torso: bool = True,
               ) -> tuple[int, float] | None:
    """Best-scoring detection strictly above the threshold, or None (search).

    Ties break toward the body box nearest the last known image position,
    then the lowest track id, then the lowest index. Returns (index, score).
    """
    config = config or ReidConfig()
    best: tuple | None = None
    for i, det in enumerate(detections):
        report = score_person(det, bank, use_face=use_face, use_torso=use_torso)
        s = report.score
        if s <= config.sim_threshold:
            continue
        if last_center is not None:
            dist = math.hypot(det.body_box.center_u - last_center[0],
                              det.body_box.center_v - last_center[1])
        else:
            dist = 0.0
        tid = track_ids[i] if track_ids is not None and track_ids[i] is not None else float("inf")
        key = (-s, dist, tid, i)
        if best is None or key < best[0]:
            best = (key, i, s)
    if best is None:
        return None
    return best[1], best[2]
