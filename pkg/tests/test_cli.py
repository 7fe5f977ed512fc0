import json
import os
import shutil

import numpy as np
import pytest

from socialsat import cli, synth
from socialsat.channels import CHANNEL_NAMES, read_channel_file
from socialsat.evaluation import parse_report_table
from socialsat.features.matrix import FeatureMatrix

N = 8


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert run("synth", "--sessions", N, "--duration-scale", 0.15, "--seed", 3, "--out", d) == 0
    return d


def inputs(d):
    return ["--landmarks", d / "landmarks", "--faces", d / "faces.csv", "--markers", d / "markers.csv",
            "--calibration", d / "calibration.json", "--questionnaire", d / "questionnaire.csv"]


@pytest.fixture(scope="module")
def pipeline_dir(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run("extract", *inputs(corpus_dir), "--out", out) == 0
    assert run("features", *inputs(corpus_dir), "--out", out) == 0
    assert run("evaluate", *inputs(corpus_dir), "--out", out) == 0
    return out


def test_synth_writes_corpus(corpus_dir):
    assert len(os.listdir(corpus_dir / "landmarks")) == N
    for name in ("faces.csv", "questionnaire.csv", "markers.csv", "calibration.json", "manifest.json"):
        assert (corpus_dir / name).exists()
    assert cli.build_parser().parse_args(["synth"]).sessions == 46


def test_extract_writes_one_channel_file_per_session(pipeline_dir):
    files = sorted(os.listdir(pipeline_dir / "channels"))
    assert len(files) == N
    cs = read_channel_file(pipeline_dir / "channels" / files[0])
    assert cs.names == CHANNEL_NAMES and len(CHANNEL_NAMES) == 23
    assert not (pipeline_dir / "errors.log").exists()


def test_missing_calibration_fails_before_processing(corpus_dir, tmp_path):
    args = [a for a in inputs(corpus_dir)]
    i = args.index("--calibration")
    del args[i : i + 2]
    assert run("extract", *args, "--out", tmp_path / "o") == 2
    assert not (tmp_path / "o" / "channels").exists()


def test_missing_input_path_is_fatal(tmp_path):
    assert run("extract", "--landmarks", tmp_path / "nope", "--calibration", tmp_path / "nope.json", "--out", tmp_path) == 2


def test_corrupt_session_isolated(corpus_dir, tmp_path):
    lm = tmp_path / "landmarks"
    shutil.copytree(corpus_dir / "landmarks", lm)
    victim = sorted(os.listdir(lm))[2]
    with open(lm / victim, "a") as fh:
        fh.write("this,is,not,a,landmark,row\n")
    args = inputs(corpus_dir)
    args[args.index("--landmarks") + 1] = lm
    out = tmp_path / "o"
    assert run("extract", *args, "--out", out) == 1
    assert len(os.listdir(out / "channels")) == N - 1
    log = (out / "errors.log").read_text()
    assert victim.removesuffix(".csv") in log and "StreamFormatError" in log
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"]["extract"]["sessions_failed"] == [victim.removesuffix(".csv")]


def test_feature_column_counts(pipeline_dir):
    counts = {e: FeatureMatrix.load(pipeline_dir / "features" / f"{e}.csv").shape for e in ("canonical22", "spectral_stat", "zones")}
    assert counts == {"canonical22": (N, 506), "spectral_stat": (N, 1794), "zones": (N, 1174)}
    assert (pipeline_dir / "features" / "zones_fitted.json").exists()


def test_full_evaluation_has_twelve_rows(pipeline_dir, capsys):
    rows = parse_report_table((pipeline_dir / "reports" / "report.txt").read_text())
    assert len(rows) == 12
    header = (pipeline_dir / "reports" / "report.txt").read_text().splitlines()[0].split()
    assert header[-5:] == ["Precision", "Recall", "F1-Score", "Accuracy", "ROC-AUC"]
    assert run("report", "--out", pipeline_dir) == 0
    assert capsys.readouterr().out == (pipeline_dir / "reports" / "report.txt").read_text()


def test_single_engine_single_model(corpus_dir, pipeline_dir, tmp_path):
    out = tmp_path / "one"
    assert run("evaluate", *inputs(corpus_dir), "--engine", "zones", "--models", "gaussian_nb",
               "--features", pipeline_dir / "features" / "zones.csv", "--out", out) == 0
    assert len(parse_report_table((out / "reports" / "report.txt").read_text())) == 1


def test_reruns_are_byte_identical(corpus_dir, pipeline_dir, tmp_path):
    out = tmp_path / "again"
    assert run("extract", *inputs(corpus_dir), "--out", out, "--workers", 2) == 0
    assert run("features", *inputs(corpus_dir), "--out", out, "--workers", 2) == 0
    assert run("evaluate", *inputs(corpus_dir), "--out", out) == 0
    for sub in ("channels", "features", "reports"):
        for name in sorted(os.listdir(pipeline_dir / sub)):
            assert (out / sub / name).read_bytes() == (pipeline_dir / sub / name).read_bytes(), name


def test_manifest_records_stages(pipeline_dir):
    m = json.loads((pipeline_dir / "manifest.json").read_text())
    assert set(m["stages"]) == {"extract", "features", "evaluate"}
    for stage in m["stages"].values():
        assert len(stage["config_hash"]) == 64 and stage["seed"] == 0 and stage["version"]
    assert m["stages"]["features"]["shapes"]["canonical22"] == [N, 506]
    assert m["stages"]["evaluate"]["rows"] == 12


def test_out_dir_from_environment(corpus_dir, pipeline_dir, tmp_path, monkeypatch):
    env_out = tmp_path / "env"
    monkeypatch.setenv(cli.OUT_ENV, str(env_out))
    assert cli.resolve_out_dir(None) == str(env_out)
    assert cli.resolve_out_dir("flag") == "flag"
    assert run("select", *inputs(corpus_dir), "--engine", "canonical22", "--k", 3,
               "--features", pipeline_dir / "features" / "canonical22.csv") == 0
    doc = json.loads((env_out / "selection" / "canonical22.json").read_text())
    assert len(doc["selected"]) == 3
    monkeypatch.delenv(cli.OUT_ENV)
    assert cli.resolve_out_dir(None) == cli.DEFAULT_OUT


def test_bad_arguments_are_fatal(tmp_path):
    assert run("evaluate", "--k", 0, "--out", tmp_path) == 2
    assert run("evaluate", "--models", "kernel_svm", "--out", tmp_path) == 2
    assert run("features", "--out", tmp_path / "empty") == 2
    assert run("report", "--out", tmp_path / "empty") == 2


def test_export_models(corpus_dir, pipeline_dir, tmp_path):
    out = tmp_path / "m"
    assert run("evaluate", *inputs(corpus_dir), "--engine", "zones", "--models", "logistic_regression",
               "--features", pipeline_dir / "features" / "zones.csv", "--export-models", "--out", out) == 0
    doc = json.loads((out / "models" / "zones__logistic_regression.json").read_text())
    assert doc["kind"] == "logistic_regression" and len(doc["extra"]["selected_features"]) == 10


def test_selection_outside_flag_warns(corpus_dir, pipeline_dir, tmp_path):
    with pytest.warns(UserWarning):
        assert run("evaluate", *inputs(corpus_dir), "--engine", "zones", "--models", "gaussian_nb",
                   "--features", pipeline_dir / "features" / "zones.csv", "--selection-outside",
                   "--out", tmp_path) == 0
    assert json.loads((tmp_path / "reports" / "report.json").read_text())["meta"]["selection_outside"]


def test_delta_corpora_differ_in_patterned_sessions_only(tmp_path):
    chans = {}
    for d in (0.0, 1.0):
        src = tmp_path / f"c{d}"
        out = tmp_path / f"o{d}"
        assert run("synth", "--sessions", 6, "--duration-scale", 0.1, "--seed", 4, "--delta", d, "--out", src) == 0
        assert run("extract", *inputs(src), "--out", out) == 0
        chans[d] = {f: read_channel_file(out / "channels" / f) for f in sorted(os.listdir(out / "channels"))}
    low = synth.low_class_members(synth.SynthConfig(n_sessions=6, seed=4))
    unpatterned_faces = [n for n in CHANNEL_NAMES if n.startswith("face_") and n != "face_fear"]
    for i, name in enumerate(sorted(chans[0.0])):
        a, b = chans[0.0][name], chans[1.0][name]
        differs = {n for n in CHANNEL_NAMES if not np.array_equal(a[n].values, b[n].values)}
        if not low[i]:
            assert not differs
        else:
            assert {"head_heading", "distance", "face_fear"} <= differs
            assert not differs & set(unpatterned_faces)
