"""Feature catalogs and the sessions-by-features matrix.

Matrix files are comma separated: an ``# engine=<name>`` line, a header row
``session_id,<channel>__<feature>,...`` and one row per session with values
written by ``repr``.  Not-computable flags go to a sidecar file of the same
shape holding 0/1.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..channels import CHANNEL_NAMES, ChannelSet
from . import canonical, spectral, zones

ENGINES = ("spectral_stat", "canonical22", "zones")


@dataclass(frozen=True)
class FeatureCatalog:
    engine: str
    names: tuple[str, ...]

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names are not unique")

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def for_engine(cls, engine: str, zone_config: zones.ZoneConfig | None = None) -> "FeatureCatalog":
        names = []
        for ch in CHANNEL_NAMES:
            names += [f"{ch}__{f}" for f in _channel_feature_names(engine, ch, zone_config)]
        return cls(engine, tuple(names))


def _channel_feature_names(engine: str, channel: str, zone_config) -> tuple[str, ...]:
    if engine == "spectral_stat":
        return spectral.FEATURE_NAMES
    if engine == "canonical22":
        return canonical.FEATURE_NAMES
    if engine == "zones":
        if zone_config is None:
            raise ValueError("the zones engine needs a zone config")
        return zones.feature_names(zone_config.n_zones(channel), zone_config.segment_count)
    raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")


@dataclass
class FeatureMatrix:
    engine: str
    session_ids: list[str]
    names: tuple[str, ...]
    values: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.session_ids), len(self.names))
        self.flags = np.asarray(self.flags, dtype=bool).reshape(self.values.shape)
        if len(set(self.session_ids)) != len(self.session_ids):
            raise ValueError("duplicate session ids in feature matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def rows(self, ids: Sequence[str]) -> "FeatureMatrix":
        idx = [self.session_ids.index(s) for s in ids]
        return FeatureMatrix(self.engine, list(ids), self.names, self.values[idx], self.flags[idx])

    def to_csv(self) -> str:
        return _table_text(self.engine, self.session_ids, self.names, [[repr(float(v)) for v in r] for r in self.values])

    def flags_to_csv(self) -> str:
        return _table_text(self.engine, self.session_ids, self.names, [[str(int(f)) for f in r] for r in self.flags])

    def save(self, path: str | os.PathLike) -> None:
        path = os.fspath(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())
        with open(flags_path(path), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.flags_to_csv())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FeatureMatrix":
        path = os.fspath(path)
        engine, ids, names, values = _read_table(path)
        fp = flags_path(path)
        if os.path.exists(fp):
            _, fids, fnames, flags = _read_table(fp)
            if fids != ids or fnames != names:
                raise ValueError(f"{fp} does not match {path}")
        else:
            flags = np.zeros_like(values)
        return cls(engine, ids, names, values, flags != 0)


def flags_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.flags{ext or '.csv'}"


def _table_text(engine, ids, names, cells) -> str:
    buf = io.StringIO()
    buf.write(f"# engine={engine}\n")
    buf.write(",".join(["session_id", *names]) + "\n")
    for sid, row in zip(ids, cells):
        buf.write(",".join([sid, *row]) + "\n")
    return buf.getvalue()


def _read_table(path: str):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    engine = None
    if lines and lines[0].startswith("# engine="):
        engine = lines[0].split("=", 1)[1].strip()
        lines = lines[1:]
    if not lines:
        raise ValueError(f"{path}: missing header row")
    header = lines[0].split(",")
    if header[0] != "session_id":
        raise ValueError(f"{path}: first column must be session_id")
    names = tuple(header[1:])
    ids, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    values = np.array(rows, dtype=float).reshape(len(ids), len(names))
    return engine, ids, names, values


def extract_channel(engine: str, values: np.ndarray, channel: str, zone_config=None):
    """(values, flags) of one channel under ``engine``."""
    if engine == "spectral_stat":
        return spectral.extract_spectral_stat(values)
    if engine == "canonical22":
        return canonical.extract_canonical22(values)
    if engine == "zones":
        return zones.extract_zone_features(
            values,
            zone_config.boundaries[channel],
            zone_config.thresholds.get(channel),
            zone_config.window_frames,
            zone_config.min_tail_frames,
            zone_config.segment_count,
        )
    raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")


def _session_row(args):
    engine, cs, zone_config = args
    vals, flags = [], []
    for ch in CHANNEL_NAMES:
        v, f = extract_channel(engine, cs[ch].values, ch, zone_config)
        vals.append(v)
        flags.append(f)
    return np.concatenate(vals), np.concatenate(flags)


def build_feature_matrix(
    sessions: Sequence[ChannelSet],
    engine: str,
    zone_config: zones.ZoneConfig | None = None,
    n_jobs: int = 1,
) -> FeatureMatrix:
    """Rows are sessions in input order, columns the engine catalog over all 23 channels.

    A zone config with unfitted equal-width rules is fitted to ``sessions``
    first.  With ``n_jobs > 1`` sessions are spread over worker processes;
    the result does not depend on scheduling.
    """
    if engine == "zones":
        if zone_config is None:
            zone_config = zones.load_zone_config()
        if not zone_config.is_fitted:
            zone_config = zone_config.fit(sessions)
    catalog = FeatureCatalog.for_engine(engine, zone_config)
    for cs in sessions:
        if not isinstance(cs, ChannelSet) or cs.names != CHANNEL_NAMES:
            raise ValueError(f"session {getattr(cs, 'session_id', cs)!r} does not carry the 23-channel schema")
    jobs = [(engine, cs, zone_config) for cs in sessions]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_session_row, jobs))
    else:
        results = [_session_row(j) for j in jobs]
    n = len(sessions)
    values = np.array([r[0] for r in results]).reshape(n, len(catalog))
    flags = np.array([r[1] for r in results], dtype=bool).reshape(n, len(catalog))
    return FeatureMatrix(engine, [cs.session_id for cs in sessions], catalog.names, values, flags)
