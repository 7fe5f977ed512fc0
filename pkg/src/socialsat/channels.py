"""The 23 named social-signal channels, face streams and channel file I/O.

Face stream format (UTF-8, comma separated, one record per line)::

    session_id,timestamp_ms,happiness,anger,disgust,fear,sadness,surprise,neutral

Channel file format: CSV with a header row.  Columns are ``frame``, the 23
channel names in canonical order, then one ``<name>__missing`` flag (0/1) per
channel.  Missing samples are written as ``nan``.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics
from .ingest import FRAME_MS, FusedPoseSeries, StreamFormatError, _read_text

BODY_CHANNELS = (
    "head_heading",
    "head_pitch",
    "head_tilt",
    "trunk_heading",
    "trunk_pitch",
    "trunk_tilt",
    "body_width",
    "body_height",
    "body_depth",
    "velocity_x",
    "velocity_y",
    "velocity_z",
    "head_vertical",
    "head_sagittal",
    "arm_opening",
    "distance",
)
EXPRESSIONS = ("happiness", "anger", "disgust", "fear", "sadness", "surprise", "neutral")
FACE_CHANNELS = tuple(f"face_{e}" for e in EXPRESSIONS)
CHANNEL_NAMES = BODY_CHANNELS + FACE_CHANNELS

UNITS = {
    **{n: "degrees" for n in BODY_CHANNELS[:6]},
    "body_width": "normalized-units",
    "body_height": "normalized-units",
    "body_depth": "normalized-units",
    "velocity_x": "units/s",
    "velocity_y": "units/s",
    "velocity_z": "units/s",
    "head_vertical": "normalized-units",
    "head_sagittal": "normalized-units",
    "arm_opening": "degrees",
    "distance": "millimeters",
    **{n: "probability" for n in FACE_CHANNELS},
}

# face samples farther than this from a grid instant are left missing
FACE_MAX_GAP_MS = 250.0


@dataclass
class SignalChannel:
    name: str
    values: np.ndarray
    missing: np.ndarray
    unit: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing = np.asarray(self.missing, dtype=bool)
        if not self.unit:
            self.unit = UNITS.get(self.name, "")
        if self.values.shape != self.missing.shape:
            raise ValueError(f"{self.name}: values and missing differ in length")
        # missing samples are always NaN so downstream code can rely on either
        self.values = np.where(self.missing, np.nan, self.values)
        if not np.all(np.isfinite(self.values[~self.missing])):
            raise ValueError(f"{self.name}: non-finite value not flagged missing")

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, name: str, values) -> "SignalChannel":
        values = np.asarray(values, dtype=float)
        return cls(name, values, ~np.isfinite(values))


@dataclass
class ChannelSet:
    session_id: str
    channels: dict[str, SignalChannel]

    def __post_init__(self):
        names = tuple(self.channels)
        if names != CHANNEL_NAMES:
            raise ValueError(f"channel schema mismatch for {self.session_id}: {names}")
        lengths = {len(c) for c in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError(f"channels of {self.session_id} have unequal lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.channels[CHANNEL_NAMES[0]])

    def __getitem__(self, name: str) -> SignalChannel:
        return self.channels[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.channels)

    def values(self) -> np.ndarray:
        """(23, T) matrix, NaN where missing."""
        return np.stack([c.values for c in self.channels.values()])

    def replace(self, channels: dict[str, SignalChannel]) -> "ChannelSet":
        return ChannelSet(self.session_id, {n: channels[n] for n in CHANNEL_NAMES})


@dataclass
class FaceFrame:
    timestamp_ms: float
    scores: np.ndarray  # 7 expression probabilities in EXPRESSIONS order


def parse_face_stream(source) -> dict[str, list[FaceFrame]]:
    """Parse a face stream into frames per session, timestamps strictly increasing."""
    out: dict[str, list[FaceFrame]] = {}
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2 + len(EXPRESSIONS):
            raise StreamFormatError(f"expected {len(EXPRESSIONS)} expression scores", lineno)
        try:
            t = float(parts[1])
            scores = np.array([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise StreamFormatError(f"non-numeric field ({exc})", lineno) from None
        if not np.isfinite(t) or not np.all((scores >= 0) & (scores <= 1)):
            raise StreamFormatError("expression score outside [0, 1]", lineno)
        frames = out.setdefault(parts[0].strip(), [])
        if frames and t <= frames[-1].timestamp_ms:
            raise StreamFormatError("face timestamps not strictly increasing", lineno)
        frames.append(FaceFrame(t, scores))
    return out


def format_face_records(session_id: str, frames: Sequence[FaceFrame]) -> str:
    fmt = "%s,%.6f," + ",".join(["%.6f"] * len(EXPRESSIONS))
    return "\n".join(fmt % ((session_id, f.timestamp_ms) + tuple(f.scores)) for f in frames)


def resample_faces(frames: Sequence[FaceFrame], grid_ms: np.ndarray, max_gap_ms: float = FACE_MAX_GAP_MS) -> np.ndarray:
    """Nearest-neighbour face scores on the pose grid, shape (7, T)."""
    out = np.full((len(EXPRESSIONS), len(grid_ms)), np.nan)
    if not frames:
        return out
    ts = np.array([f.timestamp_ms for f in frames])
    scores = np.stack([f.scores for f in frames])
    right = np.clip(np.searchsorted(ts, grid_ms), 0, len(ts) - 1)
    left = np.clip(right - 1, 0, len(ts) - 1)
    # ties go to the earlier frame
    pick = np.where(np.abs(ts[left] - grid_ms) <= np.abs(ts[right] - grid_ms), left, right)
    gap = np.abs(ts[pick] - grid_ms)
    ok = gap <= max_gap_ms
    out[:, ok] = scores[pick[ok]].T
    return out


def assemble_channels(
    fused: FusedPoseSeries,
    face_frames: Sequence[FaceFrame] = (),
    focal_px: float | None = None,
) -> ChannelSet:
    """Compute all 23 channels on the fused pose grid."""
    if len(fused) == 0:
        raise ValueError("empty pose series")
    pos, valid = fused.positions, fused.valid
    head = metrics.head_orientation(pos, valid)
    trunk = metrics.trunk_orientation(pos, valid)
    dims = metrics.body_dimensions(pos, valid)
    vel = metrics.body_velocity(pos, valid, fps=fused.fps)
    headpos = metrics.head_position(pos, valid)
    arm = metrics.arm_opening(pos, valid)
    if focal_px is None:
        dist = np.full(len(fused), np.nan)
    else:
        dist = metrics.estimate_distance(fused.iris_px, focal_px)
    body = (*head, *trunk, *dims, *vel, *headpos, arm, dist)
    grid = (fused.start_frame + np.arange(len(fused))) * FRAME_MS
    faces = resample_faces(face_frames, grid)
    channels = {}
    for name, values in zip(CHANNEL_NAMES, (*body, *faces)):
        channels[name] = SignalChannel.from_values(name, values)
    return ChannelSet(fused.session_id, channels)


def write_channel_file(channel_set: ChannelSet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_channel_file(channel_set))


def format_channel_file(channel_set: ChannelSet) -> str:
    header = ["frame", *CHANNEL_NAMES, *(f"{n}__missing" for n in CHANNEL_NAMES)]
    vals = channel_set.values()
    miss = np.stack([channel_set[n].missing for n in CHANNEL_NAMES])
    buf = io.StringIO()
    buf.write(f"# session_id={channel_set.session_id}\n")
    buf.write(",".join(header) + "\n")
    for t in range(vals.shape[1]):
        row = [str(t)] + [repr(float(v)) for v in vals[:, t]] + [str(int(m)) for m in miss[:, t]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def read_channel_file(path: str | os.PathLike, session_id: str | None = None) -> ChannelSet:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    sid = session_id
    if lines and lines[0].startswith("# session_id="):
        sid = sid or lines[0].split("=", 1)[1].strip()
        lines = lines[1:]
    if not lines:
        raise StreamFormatError("channel file has no header")
    header = lines[0].split(",")
    expected = ["frame", *CHANNEL_NAMES, *(f"{n}__missing" for n in CHANNEL_NAMES)]
    if header != expected:
        raise StreamFormatError("channel file header does not match the canonical 23 channels", 1)
    n = len(CHANNEL_NAMES)
    if len(lines) > 1:
        block = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
    else:
        block = np.zeros((0, 1 + 2 * n))
    channels = {}
    for i, name in enumerate(CHANNEL_NAMES):
        channels[name] = SignalChannel(name, block[:, 1 + i], block[:, 1 + n + i] != 0)
    return ChannelSet(sid or os.path.splitext(os.path.basename(path))[0], channels)
