"""Per-frame social-signal metrics computed from fused body poses.

All functions take landmark positions shaped ``(..., 33, 3)`` in the common
body frame (x to the user's left, y down, z toward the robot) and an optional
validity mask ``(..., 33)``.  Samples whose required landmarks are invalid come
back as NaN.

Sign conventions:

* heading: positive when the user turns toward their left.
* pitch (head): positive when looking down.  pitch (trunk): positive when
  leaning forward along the trunk's own facing direction.
* head tilt: positive when the left ear is higher than the right ear.
* trunk tilt: positive when the right shoulder is higher than the left one.
* head_vertical is nose y minus mid-shoulder y, so a raised head is negative.
"""

from __future__ import annotations

import numpy as np

from .ingest import (
    FPS,
    LEFT_EAR,
    LEFT_ELBOW,
    LEFT_HIP,
    LEFT_SHOULDER,
    NOSE,
    RIGHT_EAR,
    RIGHT_ELBOW,
    RIGHT_HIP,
    RIGHT_SHOULDER,
)

IRIS_MM = 11.7


def _masked(positions: np.ndarray, valid: np.ndarray | None) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if valid is None:
        return pos
    return np.where(np.asarray(valid, dtype=bool)[..., None], pos, np.nan)


def _wrap_deg(angle: np.ndarray) -> np.ndarray:
    """Map degrees into (-180, 180]."""
    angle = np.asarray(angle, dtype=float)
    return np.where(angle <= -180.0, angle + 360.0, angle)


def _elevation(v: np.ndarray) -> np.ndarray:
    """Angle of ``v`` above the horizontal plane, degrees (y is down)."""
    horiz = np.hypot(v[..., 0], v[..., 2])
    return np.degrees(np.arctan2(-v[..., 1], horiz))


def head_orientation(positions, valid=None):
    """(heading, pitch, tilt) of the head in degrees.

    The forward vector runs from the ear midpoint to the nose.
    """
    p = _masked(positions, valid)
    ears_mid = 0.5 * (p[..., LEFT_EAR, :] + p[..., RIGHT_EAR, :])
    f = p[..., NOSE, :] - ears_mid
    heading = np.degrees(np.arctan2(f[..., 0], f[..., 2]))
    pitch = -_elevation(f)
    tilt = _elevation(p[..., LEFT_EAR, :] - p[..., RIGHT_EAR, :])
    return _wrap_deg(heading), _wrap_deg(pitch), _wrap_deg(tilt)


def trunk_orientation(positions, valid=None):
    """(heading, pitch, tilt) of the trunk in degrees."""
    p = _masked(positions, valid)
    shoulders = p[..., LEFT_SHOULDER, :] - p[..., RIGHT_SHOULDER, :]
    # horizontal normal of the shoulder line, pointing toward the robot
    heading = np.degrees(np.arctan2(-shoulders[..., 2], shoulders[..., 0]))
    mid_sh = 0.5 * (p[..., LEFT_SHOULDER, :] + p[..., RIGHT_SHOULDER, :])
    mid_hip = 0.5 * (p[..., LEFT_HIP, :] + p[..., RIGHT_HIP, :])
    up = mid_sh - mid_hip
    # lean toward the facing direction, measured in the trunk's own sagittal plane
    horiz = np.hypot(shoulders[..., 0], shoulders[..., 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        forward = (up[..., 0] * -shoulders[..., 2] + up[..., 2] * shoulders[..., 0]) / horiz
    pitch = np.degrees(np.arctan2(forward, -up[..., 1]))
    missing_hips = ~np.isfinite(mid_hip).all(axis=-1)
    heading = np.where(missing_hips, np.nan, heading)
    tilt = _elevation(p[..., RIGHT_SHOULDER, :] - p[..., LEFT_SHOULDER, :])
    tilt = np.where(missing_hips, np.nan, tilt)
    return _wrap_deg(heading), _wrap_deg(pitch), _wrap_deg(tilt)


def body_dimensions(positions, valid=None):
    """(width, height, depth): coordinate extents over valid landmarks."""
    p = _masked(positions, valid)
    ok = np.isfinite(p).all(axis=-1)
    count = ok.sum(axis=-1)
    hi = np.where(ok[..., None], p, -np.inf).max(axis=-2)
    lo = np.where(ok[..., None], p, np.inf).min(axis=-2)
    ext = np.where((count >= 2)[..., None], hi - lo, np.nan)
    return ext[..., 0], ext[..., 1], ext[..., 2]


def centroid(positions, valid=None) -> np.ndarray:
    """Mean of the valid landmarks per frame, NaN for frames with none."""
    p = _masked(positions, valid)
    ok = np.isfinite(p).all(axis=-1)
    count = ok.sum(axis=-1)
    total = np.where(ok[..., None], p, 0.0).sum(axis=-2)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = total / count[..., None]
    return np.where((count > 0)[..., None], c, np.nan)


def body_velocity(positions, valid=None, fps: float = FPS):
    """Centroid velocity per axis in units/s for a ``(T, 33, 3)`` series.

    Central differences inside, one-sided at both ends; any frame whose
    difference touches a missing centroid is missing.
    """
    c = centroid(positions, valid)
    n = len(c)
    v = np.full((n, 3), np.nan)
    if n >= 2:
        v[1:-1] = (c[2:] - c[:-2]) * (fps / 2.0)
        v[0] = (c[1] - c[0]) * fps
        v[-1] = (c[-1] - c[-2]) * fps
    return v[:, 0], v[:, 1], v[:, 2]


def head_position(positions, valid=None):
    """(head_vertical, head_sagittal) of the nose relative to mid-shoulder."""
    p = _masked(positions, valid)
    mid_sh = 0.5 * (p[..., LEFT_SHOULDER, :] + p[..., RIGHT_SHOULDER, :])
    d = p[..., NOSE, :] - mid_sh
    return d[..., 1], d[..., 2]


def _angle_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.sum(a * b, axis=-1) / (na * nb)
    ang = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.where((na > 0) & (nb > 0), ang, np.nan)


def arm_opening(positions, valid=None):
    """Mean angle between the downward trunk axis and each upper arm, degrees."""
    p = _masked(positions, valid)
    mid_sh = 0.5 * (p[..., LEFT_SHOULDER, :] + p[..., RIGHT_SHOULDER, :])
    mid_hip = 0.5 * (p[..., LEFT_HIP, :] + p[..., RIGHT_HIP, :])
    axis = mid_hip - mid_sh
    left = _angle_deg(axis, p[..., LEFT_ELBOW, :] - p[..., LEFT_SHOULDER, :])
    right = _angle_deg(axis, p[..., RIGHT_ELBOW, :] - p[..., RIGHT_SHOULDER, :])
    both = np.stack([left, right])
    n = np.isfinite(both).sum(axis=0)
    total = np.nansum(both, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, total / n, np.nan)


def estimate_distance(iris_diameter_px, focal_px, iris_mm: float = IRIS_MM):
    """Pinhole distance to the front camera in millimetres.

    Non-positive or missing inputs give NaN.
    """
    iris = np.asarray(iris_diameter_px, dtype=float)
    focal = np.asarray(focal_px, dtype=float)
    ok = (iris > 0) & (focal > 0) & np.isfinite(iris) & np.isfinite(focal)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ok, focal * iris_mm / np.where(ok, iris, 1.0), np.nan)
