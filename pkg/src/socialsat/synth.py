"""Seeded synthetic interaction corpora with controllable class separability.

Each session is a person walking up to the robot, interacting for a duration
drawn from a truncated normal (mean 132 s, sd 61 s, limits 35..335 s) and
walking away.  Latent head/trunk angles, arm opening, position, distance and
expression levels are smooth random processes on the 30 Hz grid.  Sessions of
the low-satisfaction class get, scaled by the separability ``delta``:

* a larger head-heading oscillation and extra head-heading variance,
* a distance that grows over the interaction,
* a raised fear-expression baseline.

These signatures are modelling assumptions made so that the pipeline has
something to find; they are not observations about real users.

Every random number is drawn whatever ``delta`` and the class are, so
corpora that differ only in ``delta`` share all unpatterned signals exactly.

Rendering: the front camera sees the body frame directly at 30 fps and
reports the iris diameter; the left and right cameras run at 10 fps, are
yawed by +/-30 degrees (raw = R^T p) and observe with more noise; faces come
at 15 fps.  Entering and leaving phases have low visibility and are cut by
the phase markers; short full dropouts occur inside the interaction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .channels import EXPRESSIONS, FaceFrame, format_face_records
from .evaluation import QuestionnaireResponse, format_questionnaire
from .ingest import (
    FRAME_MS,
    N_LANDMARKS,
    CameraCalibration,
    CameraTrack,
    dump_calibration,
    format_landmark_records,
)
from .preprocess import PhaseMarkers, format_markers

FOCAL_PX = 1400.0
IRIS_MM = 11.7
SIDE_YAW_DEG = 30.0
SIDE_PERIOD_MS = 100.0
SIDE_OFFSET_MS = 7.0
FACE_PERIOD_MS = 1000.0 / 15.0
FACE_OFFSET_MS = 3.0

# low-class signatures at delta = 1 (ranges of the per-session draw)
OSC_EXTRA_DEG = (5.0, 7.0)
JITTER_GAIN = 0.75
DRIFT_MM = (150.0, 250.0)
FEAR_EXTRA = (0.08, 0.12)


@dataclass(frozen=True)
class SynthConfig:
    n_sessions: int = 46
    low_fraction: float = 15 / 46
    duration_mean_s: float = 132.0
    duration_sd_s: float = 61.0
    duration_min_s: float = 35.0
    duration_max_s: float = 335.0
    delta: float = 1.0
    seed: int = 0
    # shrinks every duration (and its limits) for quick runs; 1.0 is the real scale
    duration_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("separability delta must lie in [0, 1]")
        if self.n_sessions < 1:
            raise ValueError("need at least one session")
        if not 0.0 <= self.low_fraction <= 1.0:
            raise ValueError("low_fraction must lie in [0, 1]")
        if not self.duration_min_s < self.duration_max_s:
            raise ValueError("duration minimum must be below the maximum")
        if self.duration_sd_s <= 0 or self.duration_scale <= 0:
            raise ValueError("duration sd and scale must be positive")

    @property
    def n_low(self) -> int:
        return int(round(self.n_sessions * self.low_fraction))


@dataclass
class SessionLatent:
    """Ground-truth signals of one session on the 30 Hz grid."""

    session_id: str
    low: bool
    main_start: int
    main_end: int  # inclusive
    head: np.ndarray  # (T, 3) yaw, pitch, roll in degrees
    trunk: np.ndarray  # (T, 3)
    arm_deg: np.ndarray  # (T,)
    distance_mm: np.ndarray
    position: np.ndarray  # (T, 2) image x, y of the mid-shoulder point
    faces: np.ndarray  # (T, 7)
    visibility_scale: np.ndarray  # (T,) 1 in the interaction, low while entering/leaving or in dropouts

    def __len__(self) -> int:
        return len(self.arm_deg)


@dataclass
class SynthSession:
    session_id: str
    tracks: dict[str, CameraTrack]
    faces: list[FaceFrame]
    markers: PhaseMarkers
    response: QuestionnaireResponse
    latent: SessionLatent | None = None


@dataclass
class SynthCorpus:
    config: SynthConfig
    sessions: list[SynthSession]
    calibration: dict[str, CameraCalibration] = field(default_factory=dict)


def session_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"s{i + 1:0{width}d}" for i in range(n)]


def low_class_members(config: SynthConfig) -> np.ndarray:
    """Boolean mask of low-satisfaction sessions, drawn from the corpus seed alone."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed]))
    mask = np.zeros(config.n_sessions, bool)
    mask[rng.permutation(config.n_sessions)[: config.n_low]] = True
    return mask


def truncated_normal(rng: np.random.Generator, mean: float, sd: float, lo: float, hi: float) -> float:
    """Rejection sampling from N(mean, sd) restricted to [lo, hi]."""
    while True:
        x = rng.normal(mean, sd)
        if lo <= x <= hi:
            return float(x)


def _ou(rng: np.random.Generator, n: int, sd: float, tau_s: float) -> np.ndarray:
    """Stationary AR(1) noise with standard deviation ``sd`` and time constant ``tau_s``."""
    phi = math.exp(-1.0 / (30.0 * tau_s))
    eps = rng.standard_normal(n) * sd * math.sqrt(1 - phi * phi)
    start = rng.standard_normal() * sd
    out, _ = lfilter([1.0], [1.0, -phi], eps, zi=[phi * start])
    return out


def _items_for(rng: np.random.Generator, low: bool) -> tuple[int, ...]:
    """Five Likert items whose sum is 7..14 for the low class, 15..24 otherwise."""
    total = int(rng.integers(7, 15)) if low else int(rng.integers(15, 25))
    items = np.ones(5, dtype=int)
    for _ in range(total - 5):
        room = np.flatnonzero(items < 5)
        items[room[rng.integers(len(room))]] += 1
    return tuple(int(v) for v in items)


def simulate_session(config: SynthConfig, index: int, low: bool | None = None) -> tuple[SessionLatent, tuple[int, ...]]:
    """Latent signals and questionnaire items of session ``index``."""
    if low is None:
        low = bool(low_class_members(config)[index])
    sid = session_ids(config.n_sessions)[index]
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    sc = config.duration_scale
    dur = truncated_normal(
        rng, config.duration_mean_s * sc, config.duration_sd_s * sc, config.duration_min_s * sc, config.duration_max_s * sc
    )
    enter = rng.uniform(2.0, 4.0) * min(1.0, sc * 4)
    leave = rng.uniform(2.0, 4.0) * min(1.0, sc * 4)
    n_enter = max(1, int(round(enter * 30)))
    n_main = max(30, int(round(dur * 30)))
    n_leave = max(1, int(round(leave * 30)))
    T = n_enter + n_main + n_leave
    t = np.arange(T) / 30.0
    main = slice(n_enter, n_enter + n_main)
    g = config.delta if low else 0.0

    # head: smooth wandering plus an oscillation
    osc_amp = rng.uniform(3.0, 6.0)
    osc_extra = rng.uniform(*OSC_EXTRA_DEG)
    osc_freq = rng.uniform(0.1, 0.3)
    osc_phase = rng.uniform(0, 2 * math.pi)
    yaw_walk = _ou(rng, T, 8.0, 2.0)
    yaw_jitter = _ou(rng, T, 4.0, 0.3)
    head_yaw = yaw_walk + (osc_amp + g * osc_extra) * np.sin(2 * math.pi * osc_freq * t + osc_phase)
    head_yaw = head_yaw + (0.5 + JITTER_GAIN * g) * yaw_jitter
    head_pitch = 4.0 + _ou(rng, T, 5.0, 1.5)
    head_roll = _ou(rng, T, 3.0, 1.5)
    trunk_yaw = 0.3 * yaw_walk + _ou(rng, T, 4.0, 4.0)
    trunk_pitch = 2.0 + _ou(rng, T, 3.0, 4.0)
    trunk_roll = _ou(rng, T, 2.0, 4.0)
    arm = 14.0 + np.abs(_ou(rng, T, 10.0, 3.0))

    # distance: settles in front of the robot, optionally drifts away
    d0 = rng.uniform(800.0, 1200.0)
    drift = rng.uniform(*DRIFT_MM)
    dist = d0 + _ou(rng, T, 40.0, 3.0)
    ramp = np.zeros(T)
    ramp[main] = np.linspace(0.0, 1.0, n_main)
    ramp[main.stop :] = 1.0
    dist = dist + g * drift * ramp
    approach = np.linspace(1.0, 0.0, n_enter)
    dist[:n_enter] += 1500.0 * approach
    dist[main.stop :] += 1500.0 * np.linspace(0.0, 1.0, n_leave)

    pos = np.stack([0.5 + _ou(rng, T, 0.03, 5.0), 0.35 + _ou(rng, T, 0.01, 5.0)], axis=1)

    faces = np.empty((T, len(EXPRESSIONS)))
    fear_extra = rng.uniform(*FEAR_EXTRA)
    for j, name in enumerate(EXPRESSIONS):
        base = rng.uniform(0.4, 0.7) if name == "neutral" else rng.uniform(0.02, 0.15)
        if name == "fear":
            base = base + g * fear_extra
        faces[:, j] = np.clip(base + _ou(rng, T, 0.05, 1.0), 0.0, 1.0)

    vis = np.ones(T)
    vis[:n_enter] = 0.3
    vis[main.stop :] = 0.3
    n_drop = rng.poisson(n_main / 900.0)
    for _ in range(n_drop):
        start = int(rng.integers(main.start + 15, max(main.start + 16, main.stop - 45)))
        length = int(rng.integers(6, 30))
        vis[start : min(start + length, main.stop - 1)] = 0.2

    items = _items_for(rng, low)
    latent = SessionLatent(
        sid,
        low,
        n_enter,
        n_enter + n_main - 1,
        np.stack([head_yaw, head_pitch, head_roll], axis=1),
        np.stack([trunk_yaw, trunk_pitch, trunk_roll], axis=1),
        arm,
        dist,
        pos,
        faces,
        vis,
    )
    return latent, items


# -- rendering ---------------------------------------------------------------

# neutral skeleton, origin at mid-shoulder, x to the user's left, y down, z toward the robot
_HEAD = {
    0: (0.0, -0.125, 0.05),
    1: (0.012, -0.135, 0.042), 2: (0.02, -0.135, 0.04), 3: (0.028, -0.135, 0.036),
    4: (-0.012, -0.135, 0.042), 5: (-0.02, -0.135, 0.04), 6: (-0.028, -0.135, 0.036),
    7: (0.04, -0.125, 0.0), 8: (-0.04, -0.125, 0.0),
    9: (0.012, -0.095, 0.045), 10: (-0.012, -0.095, 0.045),
}
_NECK = np.array([0.0, -0.03, 0.0])
_TRUNK = {
    11: (0.08, 0.0, 0.0), 12: (-0.08, 0.0, 0.0),
    23: (0.05, 0.25, 0.0), 24: (-0.05, 0.25, 0.0),
    25: (0.05, 0.45, 0.05), 26: (-0.05, 0.45, 0.05),
    27: (0.05, 0.65, 0.0), 28: (-0.05, 0.65, 0.0),
    29: (0.05, 0.67, -0.02), 30: (-0.05, 0.67, -0.02),
    31: (0.05, 0.68, 0.05), 32: (-0.05, 0.68, 0.05),
}
_UPPER_ARM = 0.13
_FOREARM = 0.12
_LOWER_BODY = (25, 26, 27, 28, 29, 30, 31, 32)
_HIP_PIVOT = np.array([0.0, 0.25, 0.0])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, s], -1), np.stack([z, -s, c], -1)], -2)


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([c, s, z], -1), np.stack([-s, c, z], -1), np.stack([z, z, o], -1)], -2)


def orientation_matrix(yaw_deg, pitch_deg, roll_deg):
    """Rotation giving heading ``yaw``, pitch ``pitch`` (down positive) and tilt ``roll``."""
    y, p, r = (np.radians(np.asarray(v, dtype=float)) for v in (yaw_deg, pitch_deg, roll_deg))
    return _rot_y(y) @ _rot_x(p) @ _rot_z(r)


def render_pose(latent: SessionLatent) -> np.ndarray:
    """Body-frame landmark positions (T, 33, 3)."""
    T = len(latent)
    pts = np.zeros((T, N_LANDMARKS, 3))
    # trunk tilt convention: positive raises the right shoulder, i.e. a negative z-roll
    r_trunk = orientation_matrix(latent.trunk[:, 0], latent.trunk[:, 1], -latent.trunk[:, 2])
    for i, v in _TRUNK.items():
        pts[:, i] = _HIP_PIVOT + (r_trunk @ (np.array(v) - _HIP_PIVOT))
    neck = _HIP_PIVOT + r_trunk @ (_NECK - _HIP_PIVOT)
    r_head = orientation_matrix(latent.head[:, 0], latent.head[:, 1], latent.head[:, 2])
    for i, v in _HEAD.items():
        pts[:, i] = neck + r_head @ (np.array(v) - _NECK)
    a = np.radians(latent.arm_deg)
    down = r_trunk @ np.array([0.0, 1.0, 0.0])
    side = r_trunk @ np.array([1.0, 0.0, 0.0])
    fwd = r_trunk @ np.array([0.0, 0.0, 1.0])
    for sign, sh, el, wr, fingers in ((1, 11, 13, 15, (17, 19, 21)), (-1, 12, 14, 16, (18, 20, 22))):
        upper = np.cos(a)[:, None] * down + sign * np.sin(a)[:, None] * side
        pts[:, el] = pts[:, sh] + _UPPER_ARM * upper
        fore = 0.5 * down + 0.8 * fwd
        pts[:, wr] = pts[:, el] + _FOREARM * fore / np.linalg.norm(fore, axis=-1, keepdims=True)
        for k, f in enumerate(fingers):
            pts[:, f] = pts[:, wr] + np.array([sign * 0.01 * (k - 1), 0.015, 0.02])
    scale = (900.0 / latent.distance_mm)[:, None, None]
    offset = np.concatenate([latent.position, np.zeros((T, 1))], axis=1)[:, None, :]
    return pts * scale + offset


def side_calibration(camera: str) -> CameraCalibration:
    yaw = {"front": 0.0, "left": SIDE_YAW_DEG, "right": -SIDE_YAW_DEG}[camera]
    rot = orientation_matrix(yaw, 0.0, 0.0)
    return CameraCalibration(camera, np.asarray(rot), FOCAL_PX if camera == "front" else None)


def default_calibration() -> dict[str, CameraCalibration]:
    return {c: side_calibration(c) for c in ("front", "left", "right")}


def render_session(latent: SessionLatent, seed: int, index: int) -> tuple[dict[str, CameraTrack], list[FaceFrame]]:
    """Camera tracks and face frames of a simulated session."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index, 1]))
    T = len(latent)
    body = render_pose(latent)
    frames = np.arange(T)
    calib = default_calibration()
    tracks = {}

    vis_front = np.full((T, N_LANDMARKS), 0.95)
    vis_front[:, list(_LOWER_BODY)] = 0.3
    vis_front *= latent.visibility_scale[:, None]
    noise = rng.normal(0.0, 0.002, size=body.shape)
    lm = np.concatenate([body + noise, np.clip(vis_front + rng.uniform(-0.04, 0.04, size=vis_front.shape), 0, 1)[..., None]], axis=-1)
    iris = FOCAL_PX * IRIS_MM / latent.distance_mm * (1 + rng.normal(0.0, 0.01, size=T))
    iris = np.where(latent.visibility_scale < 1, np.nan, iris)
    tracks["front"] = CameraTrack(latent.session_id, "front", frames * FRAME_MS, lm, iris)

    side_t = np.arange(SIDE_OFFSET_MS, (T - 1) * FRAME_MS, SIDE_PERIOD_MS)
    src = side_t / FRAME_MS
    lo = np.floor(src).astype(int)
    w = (src - lo)[:, None, None]
    side_body = (1 - w) * body[lo] + w * body[np.minimum(lo + 1, T - 1)]
    side_vis_scale = latent.visibility_scale[lo]
    for cam in ("left", "right"):
        r = calib[cam].rotation
        noisy = side_body + rng.normal(0.0, 0.003, size=side_body.shape)
        raw = noisy @ r  # rows: R^T p
        vis = np.full((len(side_t), N_LANDMARKS), 0.75)
        vis[:, list(_LOWER_BODY)] = 0.35
        vis *= side_vis_scale[:, None]
        vis = np.clip(vis + rng.uniform(-0.05, 0.05, size=vis.shape), 0, 1)
        tracks[cam] = CameraTrack(
            latent.session_id, cam, side_t, np.concatenate([raw, vis[..., None]], axis=-1), np.full(len(side_t), np.nan)
        )

    face_t = np.arange(FACE_OFFSET_MS, (T - 1) * FRAME_MS, FACE_PERIOD_MS)
    idx = np.rint(face_t / FRAME_MS).astype(int)
    jitter = rng.normal(0.0, 0.01, size=(len(face_t), len(EXPRESSIONS)))
    scores = np.clip(latent.faces[idx] + jitter, 0.0, 1.0)
    seen = latent.visibility_scale[idx] >= 1
    faces = [FaceFrame(float(ts), s) for ts, s, ok in zip(face_t, scores, seen) if ok]
    return tracks, faces


def generate_session(config: SynthConfig, index: int, low: bool | None = None, keep_latent: bool = False) -> SynthSession:
    latent, items = simulate_session(config, index, low)
    tracks, faces = render_session(latent, config.seed, index)
    return SynthSession(
        latent.session_id,
        tracks,
        faces,
        PhaseMarkers(latent.main_start, latent.main_end),
        QuestionnaireResponse(latent.session_id, items),
        latent if keep_latent else None,
    )


def generate_corpus(config: SynthConfig, keep_latent: bool = False) -> SynthCorpus:
    low = low_class_members(config)
    sessions = [generate_session(config, i, bool(low[i]), keep_latent) for i in range(config.n_sessions)]
    return SynthCorpus(config, sessions, default_calibration())


def write_corpus(corpus: SynthCorpus, directory: str | os.PathLike) -> dict[str, str]:
    """Write the corpus in the ingest formats; returns the paths written.

    Layout: ``landmarks/<session>.csv`` (all cameras of one session),
    ``faces.csv``, ``questionnaire.csv``, ``markers.csv``, ``calibration.json``.
    """
    directory = os.fspath(directory)
    lm_dir = os.path.join(directory, "landmarks")
    os.makedirs(lm_dir, exist_ok=True)
    for s in corpus.sessions:
        blocks = [format_landmark_records(s.tracks[c]) for c in ("front", "left", "right") if c in s.tracks]
        with open(os.path.join(lm_dir, f"{s.session_id}.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(blocks) + "\n")
    paths = {
        "landmarks": lm_dir,
        "faces": os.path.join(directory, "faces.csv"),
        "questionnaire": os.path.join(directory, "questionnaire.csv"),
        "markers": os.path.join(directory, "markers.csv"),
        "calibration": os.path.join(directory, "calibration.json"),
    }
    with open(paths["faces"], "w", encoding="utf-8", newline="\n") as fh:
        for s in corpus.sessions:
            if s.faces:
                fh.write(format_face_records(s.session_id, s.faces) + "\n")
    with open(paths["questionnaire"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_questionnaire([s.response for s in corpus.sessions]))
    with open(paths["markers"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_markers({s.session_id: s.markers for s in corpus.sessions}))
    with open(paths["calibration"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_calibration(corpus.calibration))
    return paths
