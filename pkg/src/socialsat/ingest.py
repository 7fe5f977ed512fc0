"""Landmark stream parsing, 30 Hz resampling, camera rotation and multi-camera fusion.

Landmark stream format (UTF-8, comma separated, one record per line)::

    session_id,camera_id,timestamp_ms,x0,y0,z0,v0,...,x32,y32,z32,v32[,iris_diameter_px]

``camera_id`` is one of ``front``, ``left``, ``right``.  The 33 landmarks
follow the extractor's pose indexing (nose=0, ears=7/8, shoulders=11/12,
elbows=13/14, wrists=15/16, hips=23/24).  ``iris_diameter_px`` is optional and
only meaningful for the front camera; an empty field or ``nan`` means absent.
Blank lines and lines starting with ``#`` are ignored.

Axis convention of the common body frame: x grows to the image right (the
user's left when facing the robot), y grows downward, z grows toward the front
camera.  Exporters of extractor depth (smaller = closer) negate it.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

N_LANDMARKS = 33
FPS = 30.0
FRAME_MS = 1000.0 / FPS
CAMERAS = ("front", "left", "right")

NOSE = 0
LEFT_EAR, RIGHT_EAR = 7, 8
LEFT_SHOULDER, RIGHT_SHOULDER = 11, 12
LEFT_ELBOW, RIGHT_ELBOW = 13, 14
LEFT_WRIST, RIGHT_WRIST = 15, 16
LEFT_HIP, RIGHT_HIP = 23, 24

DEFAULT_MIN_VISIBILITY = 0.5
DEFAULT_MAX_SPREAD = 0.15

_N_VALUES = N_LANDMARKS * 4
_N_FIELDS = 3 + _N_VALUES
# frame positions closer than this to an integer are treated as on-grid
_GRID_SNAP = 1e-6


class StreamFormatError(ValueError):
    """Malformed landmark or face stream record."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class LandmarkPoint:
    x: float
    y: float
    z: float
    visibility: float


@dataclass
class CameraFrame:
    session_id: str
    camera_id: str
    timestamp_ms: float
    landmarks: np.ndarray  # (33, 4): x, y, z, visibility
    iris_diameter_px: float | None = None

    def point(self, index: int) -> LandmarkPoint:
        return LandmarkPoint(*(float(v) for v in self.landmarks[index]))


@dataclass
class CameraTrack:
    """All frames of one camera in one session, as arrays."""

    session_id: str
    camera_id: str
    timestamps: np.ndarray  # (T,)
    landmarks: np.ndarray  # (T, 33, 4)
    iris: np.ndarray  # (T,), NaN where absent

    def __len__(self) -> int:
        return len(self.timestamps)

    @classmethod
    def from_frames(cls, frames: Sequence[CameraFrame]) -> "CameraTrack":
        if not frames:
            raise ValueError("cannot build a track from zero frames")
        ids = {(f.session_id, f.camera_id) for f in frames}
        if len(ids) != 1:
            raise ValueError(f"frames mix sessions/cameras: {sorted(ids)}")
        session_id, camera_id = ids.pop()
        ts = np.array([f.timestamp_ms for f in frames], dtype=float)
        _check_monotone(ts, camera_id)
        lm = np.stack([np.asarray(f.landmarks, dtype=float) for f in frames])
        iris = np.array(
            [np.nan if f.iris_diameter_px is None else f.iris_diameter_px for f in frames],
            dtype=float,
        )
        return cls(session_id, camera_id, ts, lm, iris)

    def frames(self) -> list[CameraFrame]:
        out = []
        for t, lm, iris in zip(self.timestamps, self.landmarks, self.iris):
            out.append(
                CameraFrame(
                    self.session_id,
                    self.camera_id,
                    float(t),
                    lm.copy(),
                    None if math.isnan(iris) else float(iris),
                )
            )
        return out

    @property
    def frame_index(self) -> np.ndarray:
        """Grid index k of each frame (only meaningful after resampling)."""
        return np.rint(self.timestamps / FRAME_MS).astype(int)


@dataclass
class CameraCalibration:
    camera_id: str
    rotation: np.ndarray
    focal_px: float | None = None

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        check_rotation(self.rotation)


@dataclass
class FusedPoseSeries:
    session_id: str
    start_frame: int
    positions: np.ndarray  # (T, 33, 3), NaN where invalid
    valid: np.ndarray  # (T, 33) bool
    visibility: np.ndarray  # (T, 33), mean visibility of the fused observations
    iris_px: np.ndarray = field(default=None)  # (T,) from the front camera
    fps: float = FPS

    def __post_init__(self):
        if self.iris_px is None:
            self.iris_px = np.full(len(self.positions), np.nan)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def timestamps(self) -> np.ndarray:
        return (self.start_frame + np.arange(len(self))) * FRAME_MS


def check_rotation(rotation: np.ndarray, tol: float = 1e-9) -> None:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise CalibrationError("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise CalibrationError("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise CalibrationError("rotation determinant is not +1")


def load_calibration(path: str | os.PathLike) -> dict[str, CameraCalibration]:
    """Read ``{"cameras": {"front": {"rotation": [[..]], "focal_px": 600}, ...}}``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    cams = raw.get("cameras", raw)
    out = {}
    for cam_id, entry in cams.items():
        if cam_id not in CAMERAS:
            raise CalibrationError(f"unknown camera {cam_id!r}")
        out[cam_id] = CameraCalibration(cam_id, entry["rotation"], entry.get("focal_px"))
    return out


def dump_calibration(calibration: dict[str, CameraCalibration]) -> str:
    cams = {}
    for cam_id in CAMERAS:
        if cam_id in calibration:
            c = calibration[cam_id]
            cams[cam_id] = {"rotation": c.rotation.tolist(), "focal_px": c.focal_px}
    return json.dumps({"cameras": cams}, indent=2, sort_keys=True) + "\n"


# -- parsing -----------------------------------------------------------------


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if isinstance(source, os.PathLike):
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _check_monotone(ts: np.ndarray, camera_id: str, lines: np.ndarray | None = None) -> None:
    bad = np.flatnonzero(np.diff(ts) <= 0)
    if bad.size:
        line = None if lines is None else int(lines[bad[0] + 1])
        raise StreamFormatError(f"timestamps not strictly increasing for camera {camera_id}", line)


def _parse_records(text: str):
    """Return (line numbers, session ids, camera ids, numeric block (n, 136))."""
    numbers, sessions, cameras, normalized = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) == _N_FIELDS:
            parts.append("nan")
        elif len(parts) == _N_FIELDS + 1:
            if parts[-1].strip() == "":
                parts[-1] = "nan"
        else:
            raise StreamFormatError(
                f"expected {_N_FIELDS} or {_N_FIELDS + 1} fields ({N_LANDMARKS} landmarks), got {len(parts)}",
                lineno,
            )
        cam = parts[1].strip()
        if cam not in CAMERAS:
            raise StreamFormatError(f"unknown camera id {cam!r}", lineno)
        numbers.append(lineno)
        sessions.append(parts[0].strip())
        cameras.append(cam)
        normalized.append(",".join(parts[2:]))
    if not numbers:
        return np.zeros(0, int), [], [], np.zeros((0, _N_VALUES + 2))
    try:
        block = np.loadtxt(io.StringIO("\n".join(normalized)), delimiter=",", ndmin=2)
    except ValueError:
        for lineno, row in zip(numbers, normalized):
            try:
                [float(v) for v in row.split(",")]
            except ValueError as exc:
                raise StreamFormatError(f"non-numeric field ({exc})", lineno) from None
        raise
    lines = np.asarray(numbers)
    values = block[:, 1 : 1 + _N_VALUES].reshape(-1, N_LANDMARKS, 4)
    bad = ~np.isfinite(block[:, : 1 + _N_VALUES]).all(axis=1)
    vis = values[:, :, 3]
    bad |= ((vis < 0) | (vis > 1)).any(axis=1)
    if bad.any():
        raise StreamFormatError("non-finite value or visibility outside [0, 1]", int(lines[bad][0]))
    return lines, sessions, cameras, block


def _group_rows(sessions, cameras, lines) -> dict[tuple[str, str], np.ndarray]:
    groups: dict[tuple[str, str], list[int]] = {}
    for i, key in enumerate(zip(sessions, cameras)):
        groups.setdefault(key, []).append(i)
    return {key: np.asarray(groups[key]) for key in sorted(groups, key=lambda k: (k[0], CAMERAS.index(k[1])))}


def parse_landmark_tracks(source) -> dict[tuple[str, str], CameraTrack]:
    """Parse a landmark stream into one track per (session, camera)."""
    lines, sessions, cameras, block = _parse_records(_read_text(source))
    tracks = {}
    for key, idx in _group_rows(sessions, cameras, lines).items():
        ts = block[idx, 0]
        _check_monotone(ts, key[1], lines[idx])
        lm = block[idx, 1 : 1 + _N_VALUES].reshape(-1, N_LANDMARKS, 4)
        tracks[key] = CameraTrack(key[0], key[1], ts.copy(), lm.copy(), block[idx, -1].copy())
    return tracks


def parse_landmark_stream(source) -> list[CameraFrame]:
    """Parse a landmark stream into frames, in file order.

    Raises :class:`StreamFormatError` naming the offending line for a wrong
    landmark count, non-numeric or out-of-range values, or timestamps that do
    not strictly increase within a camera.
    """
    lines, sessions, cameras, block = _parse_records(_read_text(source))
    for key, idx in _group_rows(sessions, cameras, lines).items():
        _check_monotone(block[idx, 0], key[1], lines[idx])
    frames = []
    for s, c, row in zip(sessions, cameras, block):
        iris = row[-1]
        frames.append(
            CameraFrame(
                s,
                c,
                float(row[0]),
                row[1 : 1 + _N_VALUES].reshape(N_LANDMARKS, 4).copy(),
                None if math.isnan(iris) else float(iris),
            )
        )
    return frames


def format_landmark_records(track: CameraTrack, digits: int = 6) -> str:
    """Serialise a track in the landmark stream format (no trailing newline)."""
    fmt = "%s,%s,%.6f," + ",".join([f"%.{digits}f"] * _N_VALUES) + ",%s"
    flat = track.landmarks.reshape(len(track), _N_VALUES)
    rows = []
    for t, vals, iris in zip(track.timestamps, flat, track.iris):
        iris_s = "" if math.isnan(iris) else f"{iris:.{digits}f}"
        rows.append(fmt % ((track.session_id, track.camera_id, t) + tuple(vals) + (iris_s,)))
    return "\n".join(rows)


# -- resampling / rotation / fusion ------------------------------------------


def resample_to_30fps(track: CameraTrack | Sequence[CameraFrame]) -> CameraTrack:
    """Linearly interpolate a track onto the k * 1000/30 ms grid.

    Output frames cover every grid instant inside [first, last] input
    timestamp.  Landmark coordinates, visibilities and iris diameter are
    interpolated between the two temporally nearest input frames.
    """
    if not isinstance(track, CameraTrack):
        if len(track) < 2:
            raise ValueError("resampling needs at least 2 frames")
        track = CameraTrack.from_frames(track)
    if len(track) < 2:
        raise ValueError("resampling needs at least 2 frames")
    pos = track.timestamps / FRAME_MS
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) < _GRID_SNAP, near, pos)
    k0 = int(math.ceil(pos[0] - _GRID_SNAP))
    k1 = int(math.floor(pos[-1] + _GRID_SNAP))
    grid = np.arange(k0, k1 + 1, dtype=float)

    right = np.clip(np.searchsorted(pos, grid, side="left"), 1, len(pos) - 1)
    left = right - 1
    w = (grid - pos[left]) / (pos[right] - pos[left])
    w = np.clip(w, 0.0, 1.0)

    def interp(values: np.ndarray) -> np.ndarray:
        a, b = values[left], values[right]
        shape = (-1,) + (1,) * (values.ndim - 1)
        ww = w.reshape(shape)
        mixed = (1.0 - ww) * a + ww * b
        mixed = np.where(ww == 0.0, a, mixed)
        return np.where(ww == 1.0, b, mixed)

    return CameraTrack(
        track.session_id,
        track.camera_id,
        grid * FRAME_MS,
        interp(track.landmarks),
        interp(track.iris),
    )


def rotate_camera_frame(track, calibration: CameraCalibration):
    """Map landmark coordinates into the common body frame: v -> R v.

    Accepts a :class:`CameraTrack` or a sequence of :class:`CameraFrame` and
    returns the same kind.  Visibility is untouched.
    """
    check_rotation(calibration.rotation)
    if isinstance(track, CameraTrack):
        cam = track.camera_id
    else:
        cams = {f.camera_id for f in track}
        if len(cams) > 1:
            raise CalibrationError(f"frames from several cameras: {sorted(cams)}")
        cam = cams.pop() if cams else calibration.camera_id
    if cam != calibration.camera_id:
        raise CalibrationError(f"calibration for {calibration.camera_id!r} applied to {cam!r}")
    r = calibration.rotation

    def rotate(lm: np.ndarray) -> np.ndarray:
        out = lm.copy()
        out[..., :3] = lm[..., :3] @ r.T
        return out

    if isinstance(track, CameraTrack):
        return CameraTrack(
            track.session_id, track.camera_id, track.timestamps.copy(), rotate(track.landmarks), track.iris.copy()
        )
    return [
        CameraFrame(f.session_id, f.camera_id, f.timestamp_ms, rotate(f.landmarks), f.iris_diameter_px)
        for f in track
    ]


def fuse_poses(
    tracks: Sequence[CameraTrack],
    min_visibility: float = DEFAULT_MIN_VISIBILITY,
    max_spread: float = DEFAULT_MAX_SPREAD,
) -> FusedPoseSeries:
    """Fuse up to three resampled, rotated camera tracks into one pose per frame.

    Per landmark and frame: observations below ``min_visibility`` are dropped;
    survivors farther than ``max_spread`` from their visibility-weighted
    centroid are dropped; the rest are averaged with visibility weights.
    Sums always run in front, left, right order.
    """
    if not tracks:
        raise ValueError("fuse_poses needs at least one track")
    tracks = sorted(tracks, key=lambda t: CAMERAS.index(t.camera_id))
    if len({t.camera_id for t in tracks}) != len(tracks):
        raise ValueError("duplicate camera in fusion input")
    sessions = {t.session_id for t in tracks}
    if len(sessions) != 1:
        raise ValueError(f"tracks from several sessions: {sorted(sessions)}")
    indices = [t.frame_index for t in tracks]
    for t, idx in zip(tracks, indices):
        if len(t) and not np.allclose(t.timestamps, idx * FRAME_MS, atol=1e-6):
            raise ValueError(f"track {t.camera_id} is not on the 30 Hz grid")
    k0 = min(int(idx[0]) for idx in indices)
    k1 = max(int(idx[-1]) for idx in indices)
    n = k1 - k0 + 1

    pos = np.full((len(tracks), n, N_LANDMARKS, 3), np.nan)
    vis = np.zeros((len(tracks), n, N_LANDMARKS))
    iris = np.full(n, np.nan)
    for c, (t, idx) in enumerate(zip(tracks, indices)):
        pos[c, idx - k0] = t.landmarks[..., :3]
        vis[c, idx - k0] = t.landmarks[..., 3]
        if t.camera_id == "front":
            iris[idx - k0] = t.iris

    survive = (vis >= min_visibility) & np.isfinite(pos).all(axis=-1)
    centroid = _weighted_mean(pos, vis, survive)
    dist = np.linalg.norm(np.nan_to_num(pos) - np.nan_to_num(centroid)[None], axis=-1)
    keep = survive & (dist <= max_spread)
    fused = _weighted_mean(pos, vis, keep)
    n_keep = keep.sum(axis=0)
    valid = np.isfinite(fused).all(axis=-1)
    vis_sum = np.zeros(vis.shape[1:])
    for c in range(len(tracks)):
        vis_sum = vis_sum + np.where(keep[c], vis[c], 0.0)
    fused_vis = np.where(valid, vis_sum / np.maximum(n_keep, 1), 0.0)
    return FusedPoseSeries(tracks[0].session_id, k0, fused, valid, fused_vis, iris)


def _weighted_mean(pos: np.ndarray, weights: np.ndarray, mask: np.ndarray) -> np.ndarray:
    den = np.zeros(weights.shape[1:])
    for c in range(pos.shape[0]):
        den = den + np.where(mask[c], weights[c], 0.0)
    safe = np.where(den > 0, den, 1.0)
    out = np.zeros(pos.shape[1:])
    for c in range(pos.shape[0]):
        # normalised weights first: a lone observation passes through bit-exact
        share = np.where(mask[c], weights[c], 0.0) / safe
        out = out + np.where(mask[c][..., None], pos[c], 0.0) * share[..., None]
    return np.where((den > 0)[..., None], out, np.nan)


def group_sessions(tracks: Iterable[CameraTrack]) -> dict[str, dict[str, CameraTrack]]:
    out: dict[str, dict[str, CameraTrack]] = {}
    for t in tracks:
        out.setdefault(t.session_id, {})[t.camera_id] = t
    return out
