"""Command-line front end: ``socialsat {synth,extract,features,select,evaluate,report}``.

Every stage reads and writes plain-text files under one output directory
(``--out``, else ``$SOCIALSAT_OUT``, else ``./socialsat_out``):

    channels/<session>.csv      extract
    features/<engine>.csv       features (flags sidecar next to it)
    selection/<engine>.json     select (all-rows ranking, reporting only)
    reports/report.{txt,json}   evaluate
    models/<engine>__<model>.json   evaluate --export-models
    manifest.json               every stage: config hash, seed, stage versions
    errors.log                  per-session failures of the last extract

Exit status: 0 success, 1 partial (some sessions failed), 2 fatal.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__, evaluation, models, selection, synth
from .channels import ChannelSet, format_channel_file, parse_face_stream, read_channel_file, write_channel_file
from .features import matrix as fmatrix
from .features import zones as fzones
from .ingest import CalibrationError, StreamFormatError, group_sessions, load_calibration, parse_landmark_tracks
from .pipeline import ChainSettings, process_session
from .preprocess import parse_markers

logger = logging.getLogger("socialsat")

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2
OUT_ENV = "SOCIALSAT_OUT"
DEFAULT_OUT = "socialsat_out"
STAGE_VERSIONS = {"synth": "1", "extract": "1", "features": "1", "select": "1", "evaluate": "1", "report": "1"}


class FatalError(Exception):
    """Aborts the command with exit status 2."""


@dataclasses.dataclass
class RunConfig:
    landmarks: str | None = None
    faces: str | None = None
    questionnaire: str | None = None
    markers: str | None = None
    engine: str = "all"
    k: int = selection.DEFAULT_K
    models: tuple[str, ...] = models.KINDS
    seed: int = 0
    zone_config: str | None = None
    calibration: str | None = None
    out_dir: str = DEFAULT_OUT
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise FatalError("k must be at least 1")
        if self.workers < 1:
            raise FatalError("worker count must be at least 1")
        if self.engine != "all" and self.engine not in fmatrix.ENGINES:
            raise FatalError(f"unknown engine {self.engine!r}")
        bad = [m for m in self.models if m not in models.KINDS]
        if bad:
            raise FatalError(f"unknown model kinds {bad}")
        for name in ("landmarks", "faces", "questionnaire", "markers", "zone_config", "calibration"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise FatalError(f"{name} path does not exist: {path}")

    @property
    def engines(self) -> tuple[str, ...]:
        return fmatrix.ENGINES if self.engine == "all" else (self.engine,)

    def digest(self) -> str:
        """Hash of every field except the worker count, which never changes outputs."""
        d = dataclasses.asdict(self)
        d.pop("workers")
        d["models"] = list(d["models"])
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def resolve_out_dir(flag: str | None) -> str:
    if flag:
        return flag
    return os.environ.get(OUT_ENV) or DEFAULT_OUT


def write_manifest(out_dir: str, stage: str, config: RunConfig, extra: dict | None = None) -> None:
    path = os.path.join(out_dir, "manifest.json")
    manifest = {"package_version": __version__, "stages": {}}
    if os.path.exists(path):
        try:
            with open(path, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError):
            logger.warning("replacing unreadable manifest %s", path)
    cfg = dataclasses.asdict(config)
    cfg.pop("workers")
    cfg["models"] = list(cfg["models"])
    manifest["package_version"] = __version__
    manifest.setdefault("stages", {})[stage] = {
        "version": STAGE_VERSIONS[stage],
        "config_hash": config.digest(),
        "seed": config.seed,
        "config": cfg,
        **(extra or {}),
    }
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- extract -----------------------------------------------------------------


def _landmark_files(path: str) -> list[str]:
    if os.path.isdir(path):
        files = sorted(os.path.join(path, f) for f in os.listdir(path) if not f.startswith("."))
        return [f for f in files if os.path.isfile(f)]
    return [path]


def _extract_one(job):
    """Worker: process one session, return (session_id, channel file text or None, error or None)."""
    sid, tracks, calibration, faces, markers = job
    try:
        cs = process_session(tracks, calibration, faces, markers, ChainSettings())
        return sid, format_channel_file(cs), None
    except Exception as exc:  # isolated per session on purpose
        return sid, None, f"{type(exc).__name__}: {exc}"


def cmd_extract(config: RunConfig) -> int:
    if config.landmarks is None:
        raise FatalError("--landmarks is required")
    if config.calibration is None:
        raise FatalError("--calibration is required before any session is processed")
    try:
        calibration = load_calibration(config.calibration)
    except (OSError, ValueError, KeyError) as exc:
        raise FatalError(f"cannot read calibration: {exc}") from None

    errors: dict[str, str] = {}
    sessions: dict[str, dict] = {}
    for path in _landmark_files(config.landmarks):
        try:
            tracks = parse_landmark_tracks(Path(path))
        except StreamFormatError as exc:
            errors[Path(path).stem] = f"StreamFormatError: {exc}"
            continue
        for sid, cams in group_sessions(tracks.values()).items():
            sessions.setdefault(sid, {}).update(cams)
    cams_seen = sorted({c for cams in sessions.values() for c in cams})
    uncovered = [c for c in cams_seen if c not in calibration]
    if uncovered:
        raise FatalError(f"no calibration for cameras {uncovered}")
    faces = parse_face_stream(Path(config.faces)) if config.faces else {}
    markers = parse_markers(Path(config.markers)) if config.markers else {}

    jobs = [(sid, sessions[sid], calibration, faces.get(sid, []), markers.get(sid)) for sid in sorted(sessions)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]

    out = os.path.join(config.out_dir, "channels")
    os.makedirs(out, exist_ok=True)
    written = 0
    for sid, text, err in results:
        if err is not None:
            errors[sid] = err
            continue
        _write_text(os.path.join(out, f"{sid}.csv"), text)
        written += 1
    log_path = os.path.join(config.out_dir, "errors.log")
    if errors:
        _write_text(log_path, "".join(f"{sid}\t{msg}\n" for sid, msg in sorted(errors.items())))
        for sid, msg in sorted(errors.items()):
            logger.error("session %s failed: %s", sid, msg)
    elif os.path.exists(log_path):
        os.remove(log_path)
    write_manifest(config.out_dir, "extract", config, {"sessions_written": written, "sessions_failed": sorted(errors)})
    if written == 0:
        logger.error("no session could be processed")
        return EXIT_FATAL
    return EXIT_PARTIAL if errors else EXIT_OK


# -- features ----------------------------------------------------------------


def _load_channel_sets(directory: str) -> list[ChannelSet]:
    if not os.path.isdir(directory):
        raise FatalError(f"channel directory not found: {directory}")
    files = sorted(f for f in os.listdir(directory) if f.endswith(".csv"))
    if not files:
        raise FatalError(f"no channel files in {directory}")
    return [read_channel_file(os.path.join(directory, f)) for f in files]


def cmd_features(config: RunConfig, channels_dir: str | None = None) -> int:
    sets = _load_channel_sets(channels_dir or os.path.join(config.out_dir, "channels"))
    zc = fzones.load_zone_config(config.zone_config)
    out = os.path.join(config.out_dir, "features")
    os.makedirs(out, exist_ok=True)
    shapes = {}
    for engine in config.engines:
        cfg = None
        if engine == "zones":
            cfg = zc if zc.is_fitted else zc.fit(sets)
            fzones.dump_zone_config(cfg, os.path.join(out, "zones_fitted.json"))
        fm = fmatrix.build_feature_matrix(sets, engine, cfg, n_jobs=config.workers)
        fm.save(os.path.join(out, f"{engine}.csv"))
        shapes[engine] = list(fm.shape)
        logger.info("%s: %d sessions x %d features", engine, *fm.shape)
    write_manifest(config.out_dir, "features", config, {"shapes": shapes})
    return EXIT_OK


# -- select / evaluate -------------------------------------------------------


def _feature_paths(config: RunConfig, explicit: Sequence[str] | None) -> list[str]:
    if explicit:
        paths = list(explicit)
    else:
        paths = [os.path.join(config.out_dir, "features", f"{e}.csv") for e in config.engines]
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FatalError(f"feature matrices not found: {missing}")
    return paths


def _datasets(config: RunConfig, feature_paths: Sequence[str]) -> dict[str, evaluation.LabeledDataset]:
    if config.questionnaire is None:
        raise FatalError("--questionnaire is required")
    responses = evaluation.parse_questionnaire(Path(config.questionnaire))
    out = {}
    for p in feature_paths:
        fm = fmatrix.FeatureMatrix.load(p)
        out[fm.engine] = evaluation.label_dataset(fm, responses)
    return out


def cmd_select(config: RunConfig, feature_paths: Sequence[str] | None = None) -> int:
    logger.warning("selection on all rows is for reporting; evaluation re-selects inside every fold")
    out = os.path.join(config.out_dir, "selection")
    for engine, ds in _datasets(config, _feature_paths(config, feature_paths)).items():
        sel = selection.select_k_best(ds.matrix.values, ds.classes, ds.matrix.names, config.k)
        rows = [{"feature": n, "f": float(sel.f_values[i]), "p": float(sel.p_values[i])}
                for n, i in zip(sel.names, sel.indices)]
        doc = {"engine": engine, "k": config.k, "n": int(ds.matrix.shape[0]), "selected": rows,
               "mean": sel.mean.tolist(), "std": sel.std.tolist()}
        _write_text(os.path.join(out, f"{engine}.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_manifest(config.out_dir, "select", config)
    return EXIT_OK


def _export_models(config: RunConfig, datasets, report: evaluation.EvalReport) -> None:
    out = os.path.join(config.out_dir, "models")
    for entry in report.entries:
        ds = datasets[entry.engine]
        sel = selection.select_k_best(ds.matrix.values, ds.classes, ds.matrix.names, config.k)
        X = sel.transform(ds.matrix.values)
        spec = models.grid_search(models.default_grid(entry.model, config.seed), X, ds.classes)
        trained = models.train(spec, X, ds.classes)
        extra = {"engine": entry.engine, "selected_features": list(sel.names),
                 "mean": sel.mean.tolist(), "std": sel.std.tolist()}
        os.makedirs(out, exist_ok=True)
        models.save_model(trained, os.path.join(out, f"{entry.engine}__{entry.model}.json"), extra)


def cmd_evaluate(config: RunConfig, feature_paths: Sequence[str] | None = None,
                 selection_outside: bool = False, export_models: bool = False) -> int:
    datasets = _datasets(config, _feature_paths(config, feature_paths))
    report, _ = evaluation.evaluate_all(datasets, config.models, config.k, config.seed, selection_outside)
    out = os.path.join(config.out_dir, "reports")
    os.makedirs(out, exist_ok=True)
    report.save(out)
    if export_models:
        _export_models(config, datasets, report)
    sys.stdout.write(evaluation.render_report(report))
    write_manifest(config.out_dir, "evaluate", config, {"rows": len(report.entries)})
    return EXIT_OK


def cmd_report(config: RunConfig, report_path: str | None = None) -> int:
    path = report_path or os.path.join(config.out_dir, "reports", "report.json")
    if not os.path.exists(path):
        raise FatalError(f"report not found: {path}")
    with open(path, encoding="utf-8") as fh:
        report = evaluation.EvalReport.from_json(fh.read())
    sys.stdout.write(evaluation.render_report(report))
    return EXIT_OK


# -- synth -------------------------------------------------------------------


def cmd_synth(config: RunConfig, synth_config: synth.SynthConfig) -> int:
    corpus = synth.generate_corpus(synth_config)
    synth.write_corpus(corpus, config.out_dir)
    extra = {"synth": dataclasses.asdict(synth_config), "sessions": len(corpus.sessions)}
    write_manifest(config.out_dir, "synth", config, extra)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _model_list(text: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--landmarks", help="landmark stream file, or a directory of them (one or more sessions each)")
    common.add_argument("--faces", help="face-expression stream file")
    common.add_argument("--questionnaire", help="questionnaire file: session_id,i1..i5 per line")
    common.add_argument("--markers", help="phase marker file")
    common.add_argument("--engine", default="all", choices=("all",) + fmatrix.ENGINES)
    common.add_argument("--k", type=int, default=selection.DEFAULT_K, help="features kept per fold (default 10)")
    common.add_argument("--models", type=_model_list, default=models.KINDS,
                        help="comma-separated model kinds (default: all four)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--zone-config", help="zone boundary JSON (default: packaged config)")
    common.add_argument("--calibration", help="camera calibration JSON")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="socialsat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"socialsat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a seeded synthetic corpus")
    s.add_argument("--sessions", type=int, default=46)
    s.add_argument("--delta", type=float, default=1.0, help="class separability in [0, 1]")
    s.add_argument("--low-fraction", type=float, default=15 / 46)
    s.add_argument("--duration-scale", type=float, default=1.0, help="shrink session durations for quick runs")

    sub.add_parser("extract", parents=[common], help="landmark streams to channel files")

    f = sub.add_parser("features", parents=[common], help="channel files to feature matrices")
    f.add_argument("--channels", help="channel directory (default: <out>/channels)")

    for name, text in (("select", "all-rows feature ranking"), ("evaluate", "leave-one-out evaluation")):
        e = sub.add_parser(name, parents=[common], help=text)
        e.add_argument("--features", nargs="+", help="feature matrix files (default: <out>/features/<engine>.csv)")
        if name == "evaluate":
            e.add_argument("--selection-outside", action="store_true",
                           help="select features once on all rows (leaky, for comparison only)")
            e.add_argument("--export-models", action="store_true", help="also save models trained on all rows")

    r = sub.add_parser("report", parents=[common], help="print a saved report as a table")
    r.add_argument("--report", help="report JSON (default: <out>/reports/report.json)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig(
            landmarks=args.landmarks, faces=args.faces, questionnaire=args.questionnaire, markers=args.markers,
            engine=args.engine, k=args.k, models=tuple(args.models), seed=args.seed,
            zone_config=args.zone_config, calibration=args.calibration,
            out_dir=resolve_out_dir(args.out), workers=args.workers,
        )
        os.makedirs(config.out_dir, exist_ok=True)
        if args.command == "synth":
            sc = synth.SynthConfig(n_sessions=args.sessions, low_fraction=args.low_fraction, delta=args.delta,
                                   seed=args.seed, duration_scale=args.duration_scale)
            return cmd_synth(config, sc)
        if args.command == "extract":
            return cmd_extract(config)
        if args.command == "features":
            return cmd_features(config, args.channels)
        if args.command == "select":
            return cmd_select(config, args.features)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.features, args.selection_outside, args.export_models)
        return cmd_report(config, args.report)
    except FatalError as exc:
        logger.error("%s", exc)
        return EXIT_FATAL
    except (ValueError, OSError, CalibrationError, StreamFormatError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
