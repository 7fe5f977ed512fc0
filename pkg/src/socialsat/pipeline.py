"""The per-session processing chain: tracks -> fused pose -> prepared channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .channels import ChannelSet, FaceFrame, assemble_channels
from .ingest import (
    DEFAULT_MAX_SPREAD,
    DEFAULT_MIN_VISIBILITY,
    CalibrationError,
    CameraCalibration,
    CameraTrack,
    fuse_poses,
    resample_to_30fps,
    rotate_camera_frame,
)
from .preprocess import DEFAULT_SMOOTH_WINDOW, PhaseMarkers, prepare


@dataclass(frozen=True)
class ChainSettings:
    min_visibility: float = DEFAULT_MIN_VISIBILITY
    max_spread: float = DEFAULT_MAX_SPREAD
    smooth_window: int = DEFAULT_SMOOTH_WINDOW


def extract_channels(
    tracks: Mapping[str, CameraTrack],
    calibration: Mapping[str, CameraCalibration],
    faces: Sequence[FaceFrame] = (),
    settings: ChainSettings = ChainSettings(),
) -> ChannelSet:
    """Resample, rotate and fuse the camera tracks, then compute the 23 raw channels."""
    if not tracks:
        raise ValueError("session has no camera tracks")
    ready = []
    for cam, track in tracks.items():
        if cam not in calibration:
            raise CalibrationError(f"no calibration for camera {cam!r}")
        ready.append(rotate_camera_frame(resample_to_30fps(track), calibration[cam]))
    fused = fuse_poses(ready, settings.min_visibility, settings.max_spread)
    focal = calibration["front"].focal_px if "front" in calibration else None
    return assemble_channels(fused, faces, focal)


def process_session(
    tracks: Mapping[str, CameraTrack],
    calibration: Mapping[str, CameraCalibration],
    faces: Sequence[FaceFrame] = (),
    markers: PhaseMarkers | None = None,
    settings: ChainSettings = ChainSettings(),
) -> ChannelSet:
    """Raw channels trimmed to the main phase, gap-filled and smoothed."""
    raw = extract_channels(tracks, calibration, faces, settings)
    return prepare(raw, markers, settings.smooth_window)
