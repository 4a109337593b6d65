import json
import subprocess
import sys

import numpy as np
import pytest

from scarcelearn.cli import main, read_label_segments, segment_labels
from scarcelearn.errors import InputError
from scarcelearn.io import read_features, read_json

SMALL_SYNTH = {"n_subjects": 1, "labeled_minutes_per_class": 1.0, "unlabeled_minutes": 0.5}
SMALL_REPRODUCE = {"synth": SMALL_SYNTH, "hyper": {"cd": {"iterations": 2}, "finetune": {"iterations": 2}},
                   "fractions": [0.05, 0.2], "methods": [1, 3], "repeats": 2}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write(root / "synth.json", SMALL_SYNTH)
    assert main(["synth", "--config", cfg, "--out", str(root / "data"), "--raw", "--seed", "4"]) == 0
    return root


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "reproduce" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main(["bogus"]) == 1
    assert main(["eval", "cv", "--unknown-flag"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["eval", "cv"]) == 1  # --data missing
    assert main(["reproduce", "--out", "x.json", "--jobs", "0"]) == 1


def test_data_errors(tmp_path):
    assert main(["eval", "cv", "--data", str(tmp_path / "nothing")]) == 2
    assert main(["eval", "cv", "--data", str(tmp_path), "--method", "11"]) == 2


def test_synth_outputs(data_dir):
    d = data_dir / "data"
    manifest = read_json(d / "manifest.json")
    assert manifest["subjects"] == ["S01"]
    assert manifest["provenance"]["seed"] == 4 and "config_hash" in manifest["provenance"]
    fm = read_features(d / "S01.features.csv")
    assert fm.dim == 312
    assert (d / "S01.rec.json").exists() and (d / "S01.labels.csv").exists()


def test_raw_pipeline_commands(data_dir, tmp_path):
    d = data_dir / "data"
    assert main(["preprocess", "--in", str(d / "S01.rec.json"), "--out", str(tmp_path / "clean.json")]) == 0
    assert main(["features", "--in", str(tmp_path / "clean.json"), "--labels", str(d / "S01.labels.csv"),
                 "--out", str(tmp_path / "f.csv")]) == 0
    ours = read_features(tmp_path / "f.csv")
    ref = read_features(d / "S01.features.csv")
    np.testing.assert_array_equal(ours.labels, ref.labels)
    np.testing.assert_allclose(ours.values, ref.values, atol=1e-9)


def test_pretrain_finetune_commands(data_dir, tmp_path):
    feats = str(data_dir / "data" / "S01.features.csv")
    stack, trace = tmp_path / "stack.json", tmp_path / "trace.csv"
    assert main(["pretrain", "--features", feats, "--spec", "10,4", "--iters", "3", "--trace", str(trace),
                 "--out", str(stack)]) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "iteration,layer1,layer2" and len(lines) == 4
    for mode in ("classifier", "autoencoder"):
        out = tmp_path / f"{mode}.json"
        assert main(["finetune", "--stack", str(stack), "--mode", mode, "--features", feats, "--iters", "2",
                     "--dropout", "0.2,0.5", "--out", str(out)]) == 0
        payload = read_json(out)
        assert payload["topology"] == mode and "seed" in payload["provenance"]


def test_divergence_exit_code(data_dir, tmp_path):
    feats = str(data_dir / "data" / "S01.features.csv")
    code = main(["pretrain", "--features", feats, "--spec", "10", "--iters", "200", "--lr", "50",
                 "--momentum", "0.99", "--out", str(tmp_path / "s.json")])
    assert code == 3


def test_eval_commands(data_dir, tmp_path):
    d = str(data_dir / "data")
    cfg = write(tmp_path / "h.json", SMALL_REPRODUCE["hyper"])
    assert main(["eval", "cv", "--data", d, "--method", "1", "--repeats", "1", "--out",
                 str(tmp_path / "cv.json")]) == 0
    cv = read_json(tmp_path / "cv.json")
    assert 0 <= cv["mean"] <= 100 and cv["leakage_audit"]["test_rows_used"] == 0
    assert main(["eval", "prefix", "--data", d, "--methods", "1,5", "--fractions", "0.1,0.2", "--repeats", "1",
                 "--config", cfg, "--out", str(tmp_path / "p.json")]) == 0
    assert set(read_json(tmp_path / "p.json")["grid"]) == {"1", "5"}


def test_reproduce_byte_identical(tmp_path):
    cfg = write(tmp_path / "r.json", SMALL_REPRODUCE)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["reproduce", "--config", cfg, "--out", str(a), "--render", str(tmp_path / "t.md"),
                 "--series", str(tmp_path / "s.csv")]) == 0
    assert main(["reproduce", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["provenance"]["seed"] == 0 and "trends" in report
    assert "Top 5%" in (tmp_path / "t.md").read_text()


def test_seed_env_overrides_flag(tmp_path, monkeypatch):
    cfg = write(tmp_path / "s.json", SMALL_SYNTH)
    monkeypatch.setenv("SCARCELEARN_SEED", "9")
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "d"), "--seed", "1"]) == 0
    assert read_json(tmp_path / "d" / "manifest.json")["provenance"]["seed"] == 9
    monkeypatch.setenv("SCARCELEARN_SEED", "abc")
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "e")]) == 2


def test_sweep_command(data_dir, tmp_path):
    cfg = write(tmp_path / "h.json", {"hyper": SMALL_REPRODUCE["hyper"]})
    assert main(["sweep", "--data", str(data_dir / "data"), "--config", cfg, "--structures", "20;10-4",
                 "--out", str(tmp_path / "sw.json")]) == 0
    sw = read_json(tmp_path / "sw.json")
    assert set(sw["results"]["classifier"]) == {"20", "10-4"}


def test_label_segments(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("start_s,end_s,label\n0,10,1\n10,20,0\n")
    segs = read_label_segments(p)
    assert segs == [(0.0, 10.0, 1), (10.0, 20.0, 0)]
    labels = segment_labels([0.0, 7.0, 9.0, 17.0, 19.0], 3.0, segs)
    assert labels.tolist() == [1, 1, 0, 0, -1]
    p.write_text("0,10,1\n5,2,0\n")
    with pytest.raises(InputError):
        read_label_segments(p)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "scarcelearn", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "usage" in r.stdout
