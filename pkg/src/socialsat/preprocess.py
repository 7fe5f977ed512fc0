"""Main-phase trimming, gap interpolation and smoothing of channels.

Markers file: one ``session_id,start_frame,end_frame`` record per line, bounds
inclusive and counted on the session's 30 Hz channel grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, SignalChannel
from .ingest import StreamFormatError, _read_text

logger = logging.getLogger(__name__)

DEFAULT_SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class PhaseMarkers:
    main_start_frame: int
    main_end_frame: int

    def check(self, length: int) -> None:
        if not 0 <= self.main_start_frame < self.main_end_frame < length:
            raise ValueError(
                f"markers [{self.main_start_frame}, {self.main_end_frame}] invalid for length {length}"
            )


def parse_markers(source) -> dict[str, PhaseMarkers]:
    out = {}
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise StreamFormatError("expected session_id,start_frame,end_frame", lineno)
        try:
            out[parts[0]] = PhaseMarkers(int(parts[1]), int(parts[2]))
        except ValueError:
            raise StreamFormatError("frame bounds must be integers", lineno) from None
    return out


def format_markers(markers: dict[str, PhaseMarkers]) -> str:
    return "".join(f"{sid},{m.main_start_frame},{m.main_end_frame}\n" for sid, m in markers.items())


def trim_main_phase(channel_set: ChannelSet, markers: PhaseMarkers) -> ChannelSet:
    markers.check(len(channel_set))
    sl = slice(markers.main_start_frame, markers.main_end_frame + 1)
    return channel_set.replace(
        {n: SignalChannel(n, c.values[sl], c.missing[sl], c.unit) for n, c in channel_set.channels.items()}
    )


def interpolate_missing(channel: SignalChannel) -> SignalChannel:
    """Fill interior gaps linearly and edge gaps with the nearest valid value.

    An all-missing channel is returned unchanged (still fully missing).
    """
    ok = ~channel.missing
    if ok.all():
        return channel
    if not ok.any():
        logger.debug("channel %s is entirely missing", channel.name)
        return channel
    idx = np.arange(len(channel))
    good = np.flatnonzero(ok)
    # np.interp clamps to the end values outside [good[0], good[-1]]
    filled = np.interp(idx, good, channel.values[good])
    filled[good] = channel.values[good]
    return SignalChannel(channel.name, filled, np.zeros(len(channel), bool), channel.unit)


def smooth(channel: SignalChannel, window: int = DEFAULT_SMOOTH_WINDOW) -> SignalChannel:
    """Centered moving average; near the edges only the available samples are averaged.

    Missing samples are skipped in the average and stay missing.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd frame count")
    if window == 1 or len(channel) == 0:
        return channel
    half = window // 2
    ok = ~channel.missing
    vals = np.pad(np.where(ok, channel.values, 0.0), half)
    okp = np.pad(ok.astype(float), half)
    total = np.lib.stride_tricks.sliding_window_view(vals, window).sum(axis=1)
    count = np.lib.stride_tricks.sliding_window_view(okp, window).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = total / count
    return SignalChannel(channel.name, out, channel.missing.copy(), channel.unit)


def prepare(channel_set: ChannelSet, markers: PhaseMarkers | None = None, window: int = DEFAULT_SMOOTH_WINDOW) -> ChannelSet:
    """Trim (if markers given), interpolate and smooth every channel."""
    if markers is not None:
        channel_set = trim_main_phase(channel_set, markers)
    return channel_set.replace(
        {n: smooth(interpolate_missing(c), window) for n, c in channel_set.channels.items()}
    )
