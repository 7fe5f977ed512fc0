"""Zone-based handcrafted features.

Each channel's value range is cut into numbered zones by an ordered boundary
list; zone 1 is everything below the first boundary, zone Z everything at or
above the last.  The channel is averaged over consecutive 15-frame (0.5 s)
windows and every window mean is mapped to a zone.  A value lying exactly on
a boundary belongs to the higher zone.

Per channel the features are, in order: raw mean, min, max, std; the modal
zone (ties go to the lowest zone); the fraction of windows in each zone; the
zone-transition count; the longest and the shortest run in any zone (in
windows); and, for each of five equal-duration segments of the session, the
fraction of that segment's windows in each zone.  That is 8 + 6*Z features.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from ..channels import CHANNEL_NAMES

logger = logging.getLogger(__name__)

WINDOW_FRAMES = 15
MIN_TAIL_FRAMES = 5
SEGMENT_COUNT = 5
MAX_ZONES = 10
DEFAULT_CONFIG_RESOURCE = "zones_default.json"


@dataclass(frozen=True)
class EqualWidthRule:
    """Boundaries to be fitted: ``zones`` equal-width zones over corpus percentiles."""

    zones: int = 10
    lower_pct: float = 1.0
    upper_pct: float = 99.0

    def fit(self, values: np.ndarray) -> tuple[float, ...]:
        values = values[np.isfinite(values)]
        if len(values) == 0:
            lo, hi = 0.0, 1.0
        else:
            lo, hi = np.percentile(values, [self.lower_pct, self.upper_pct])
        if not hi > lo:
            lo, hi = lo - 0.5, lo + 0.5
        step = (hi - lo) / self.zones
        return tuple(float(lo + k * step) for k in range(1, self.zones))


@dataclass
class ZoneConfig:
    """Zone boundaries per channel plus optional face pre-binarization thresholds.

    A channel may carry an :class:`EqualWidthRule` instead of boundaries; such
    a config must be :meth:`fit` to a corpus before features are extracted.
    """

    boundaries: dict[str, object]
    thresholds: dict[str, float] = field(default_factory=dict)
    window_frames: int = WINDOW_FRAMES
    min_tail_frames: int = MIN_TAIL_FRAMES
    segment_count: int = SEGMENT_COUNT

    def __post_init__(self):
        missing = [n for n in CHANNEL_NAMES if n not in self.boundaries]
        if missing:
            raise ValueError(f"zone config lacks channels {missing}")
        extra = [n for n in self.boundaries if n not in CHANNEL_NAMES]
        if extra:
            raise ValueError(f"zone config names unknown channels {extra}")
        clean = {}
        for name in CHANNEL_NAMES:
            spec = self.boundaries[name]
            if isinstance(spec, EqualWidthRule):
                if not 2 <= spec.zones <= MAX_ZONES:
                    raise ValueError(f"{name}: zone count must be in 2..{MAX_ZONES}")
                clean[name] = spec
                continue
            b = tuple(float(v) for v in spec)
            check_boundaries(b, name)
            clean[name] = b
        self.boundaries = clean
        for name, th in self.thresholds.items():
            if name not in CHANNEL_NAMES:
                raise ValueError(f"threshold for unknown channel {name}")
            if not np.isfinite(th):
                raise ValueError(f"{name}: threshold must be finite")
        if self.window_frames < 1 or self.segment_count < 1 or self.min_tail_frames < 1:
            raise ValueError("window, tail and segment sizes must be positive")

    @property
    def is_fitted(self) -> bool:
        return not any(isinstance(b, EqualWidthRule) for b in self.boundaries.values())

    def n_zones(self, name: str) -> int:
        spec = self.boundaries[name]
        if isinstance(spec, EqualWidthRule):
            return spec.zones
        return len(spec) + 1

    def fit(self, sessions: Iterable) -> "ZoneConfig":
        """Resolve equal-width rules from the pooled values of ``sessions``.

        Only raw channel values are used, never labels.
        """
        sessions = list(sessions)
        out = {}
        for name in CHANNEL_NAMES:
            spec = self.boundaries[name]
            if isinstance(spec, EqualWidthRule):
                pooled = np.concatenate([s[name].values for s in sessions]) if sessions else np.array([])
                out[name] = spec.fit(pooled)
            else:
                out[name] = spec
        return ZoneConfig(out, dict(self.thresholds), self.window_frames, self.min_tail_frames, self.segment_count)

    def to_dict(self) -> dict:
        chans = {}
        for name in CHANNEL_NAMES:
            spec = self.boundaries[name]
            entry: dict = {}
            if isinstance(spec, EqualWidthRule):
                entry["equal_width"] = {"zones": spec.zones, "percentiles": [spec.lower_pct, spec.upper_pct]}
            else:
                entry["boundaries"] = list(spec)
            if name in self.thresholds:
                entry["threshold"] = self.thresholds[name]
            chans[name] = entry
        return {
            "window_frames": self.window_frames,
            "min_tail_frames": self.min_tail_frames,
            "segment_count": self.segment_count,
            "channels": chans,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ZoneConfig":
        bounds, thresholds = {}, {}
        for name, entry in data["channels"].items():
            if "equal_width" in entry:
                ew = entry["equal_width"]
                lo, hi = ew.get("percentiles", [1.0, 99.0])
                bounds[name] = EqualWidthRule(int(ew.get("zones", 10)), float(lo), float(hi))
            else:
                bounds[name] = entry["boundaries"]
            if entry.get("threshold") is not None:
                thresholds[name] = float(entry["threshold"])
        return cls(
            bounds,
            thresholds,
            int(data.get("window_frames", WINDOW_FRAMES)),
            int(data.get("min_tail_frames", MIN_TAIL_FRAMES)),
            int(data.get("segment_count", SEGMENT_COUNT)),
        )


def check_boundaries(boundaries, name: str = "channel") -> None:
    b = np.asarray(boundaries, dtype=float)
    if len(b) == 0 or len(b) + 1 > MAX_ZONES:
        raise ValueError(f"{name}: need 1..{MAX_ZONES - 1} boundaries, got {len(b)}")
    if not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
        raise ValueError(f"{name}: boundaries must be finite and strictly increasing")


def load_zone_config(path: str | os.PathLike | None = None) -> ZoneConfig:
    """Read a zone config file; ``None`` loads the shipped default."""
    if path is None:
        text = resources.files("socialsat.data").joinpath(DEFAULT_CONFIG_RESOURCE).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return ZoneConfig.from_dict(json.loads(text))


def dump_zone_config(config: ZoneConfig, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


def window_edges(n: int, window: int = WINDOW_FRAMES, min_tail: int = MIN_TAIL_FRAMES) -> np.ndarray:
    """Start indices of each window plus the end, e.g. 45 frames -> [0, 15, 30, 45]."""
    if n < 1:
        raise ValueError("cannot window an empty channel")
    starts = list(range(0, n, window))
    tail = n - starts[-1]
    if tail < window and tail < min_tail and len(starts) > 1:
        starts.pop()
    return np.array(starts + [n])


def window_means(values: np.ndarray, window: int = WINDOW_FRAMES, min_tail: int = MIN_TAIL_FRAMES) -> np.ndarray:
    edges = window_edges(len(values), window, min_tail)
    sums = np.add.reduceat(values, edges[:-1])
    return sums / np.diff(edges)


def zone_of(values, boundaries) -> np.ndarray:
    """1-based zone index; boundary values go to the higher zone."""
    return np.searchsorted(np.asarray(boundaries, dtype=float), values, side="right") + 1


def assign_zones(
    values,
    boundaries,
    window: int = WINDOW_FRAMES,
    min_tail: int = MIN_TAIL_FRAMES,
) -> np.ndarray:
    """Zone index of every 0.5 s window mean of ``values``."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValueError("cannot assign zones to an empty channel")
    check_boundaries(boundaries)
    return zone_of(window_means(values, window, min_tail), boundaries)


def run_lengths(zones: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of equal consecutive entries."""
    if len(zones) == 0:
        return np.zeros(0, dtype=int)
    change = np.flatnonzero(np.diff(zones) != 0) + 1
    edges = np.concatenate([[0], change, [len(zones)]])
    return np.diff(edges)


def feature_names(n_zones: int, segments: int = SEGMENT_COUNT) -> tuple[str, ...]:
    names = ["mean", "minimum", "maximum", "std", "modal_zone"]
    names += [f"zone{z}_fraction" for z in range(1, n_zones + 1)]
    names += ["zone_transitions", "longest_zone_run", "shortest_zone_run"]
    for s in range(1, segments + 1):
        names += [f"segment{s}_zone{z}_fraction" for z in range(1, n_zones + 1)]
    return tuple(names)


def segment_of_windows(edges: np.ndarray, segments: int) -> np.ndarray:
    """Segment index (0-based) of each window, by the frame at its centre."""
    n = edges[-1]
    centres = 0.5 * (edges[:-1] + edges[1:] - 1)
    return np.minimum((centres * segments / n).astype(int), segments - 1)


def extract_zone_features(values, boundaries, threshold: float | None = None,
                          window: int = WINDOW_FRAMES, min_tail: int = MIN_TAIL_FRAMES,
                          segments: int = SEGMENT_COUNT) -> tuple[np.ndarray, np.ndarray]:
    """Return (values, flags) aligned with :func:`feature_names`.

    A channel with any missing sample flags every feature.  A segment that
    contains no window flags its zone fractions.
    """
    x = np.asarray(values, dtype=float)
    if len(x) == 0:
        raise ValueError("cannot extract zone features from an empty channel")
    check_boundaries(boundaries)
    z_count = len(boundaries) + 1
    n_feat = len(feature_names(z_count, segments))
    if not np.all(np.isfinite(x)):
        return np.zeros(n_feat), np.ones(n_feat, bool)

    zoned = (x >= threshold).astype(float) if threshold is not None else x
    edges = window_edges(len(x), window, min_tail)
    zones = zone_of(np.add.reduceat(zoned, edges[:-1]) / np.diff(edges), boundaries)
    n_win = len(zones)

    counts = np.bincount(zones, minlength=z_count + 1)[1:]
    runs = run_lengths(zones)
    out = [x.mean(), x.min(), x.max(), x.std()]
    out.append(float(np.argmax(counts) + 1))
    out += list(counts / n_win)
    out += [float(len(runs) - 1), float(runs.max()), float(runs.min())]

    flags = np.zeros(n_feat, bool)
    seg = segment_of_windows(edges, segments)
    base = len(out)
    for s in range(segments):
        in_seg = zones[seg == s]
        if len(in_seg) == 0:
            out += [0.0] * z_count
            flags[base + s * z_count : base + (s + 1) * z_count] = True
        else:
            out += list(np.bincount(in_seg, minlength=z_count + 1)[1:] / len(in_seg))
    return np.asarray(out, dtype=float), flags
