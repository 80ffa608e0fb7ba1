import json
import subprocess
import sys

import pytest

from dstr.cli import main

FAST_YAML = "K: 8\nN: 3\nrestarts: 1\nhmm_max_iter: 20\nrepeats: 1\n"


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "fast.yaml").write_text(FAST_YAML)
    assert main(["synth", "--spec", "hands-up", "--seed", "0", "--out", str(d / "ds")]) == 0
    return d


def test_synth_writes_videos(work):
    assert sorted(p.name for p in (work / "ds").glob("*.json")) == ["hands_up_s1_r1.json", "idle_s1_r1.json"]


def test_features(work, capsys):
    assert main(["features", "--config", str(work / "fast.yaml"), "--dataset", str(work / "ds"), "--out", str(work / "feat")]) == 0
    header = (work / "feat" / "hands_up_s1_r1.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["window", "first_fragment", "last_fragment", "frame_start", "frame_end"]
    assert header[5] == "Whole:D1-BEFORE-D1" and header[-1].startswith("Lower:")
    assert "wrote 2 feature tables" in capsys.readouterr().out


def test_train_and_predict(work, capsys):
    bundle = work / "bundle.json"
    args = ["train", "--config", str(work / "fast.yaml"), "--dataset", str(work / "ds"), "--seed", "3", "--out"]
    assert main(args + [str(bundle)]) == 0
    assert main(args + [str(work / "bundle2.json")]) == 0
    assert bundle.read_bytes() == (work / "bundle2.json").read_bytes()
    capsys.readouterr()
    assert main(["predict", "--bundle", str(bundle), "--video", str(work / "ds" / "hands_up_s1_r1.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["label"] == "hands_up"
    assert set(out["scores"]) == {"idle", "hands_up"}


def test_evaluate_needs_two_subjects(work, capsys):
    assert main(["evaluate", "--config", str(work / "fast.yaml"), "--dataset", str(work / "ds")]) == 1
    assert "error [evaluate]" in capsys.readouterr().err


def test_evaluate_report(tmp_path, capsys):
    script = tmp_path / "s.yaml"
    script.write_text(
        "subjects: 2\nrepetitions: 2\njitter: 0.5\n"
        "classes:\n"
        "  - {name: idle, segments: [{frames: 20}]}\n"
        "  - name: wave\n"
        "    segments: [{frames: 4}, {frames: 8, move: {right_hand: [150, 40]}}, {frames: 8, move: {right_hand: [165, 180]}}]\n"
    )
    (tmp_path / "fast.yaml").write_text(FAST_YAML)
    assert main(["synth", "--spec", str(script), "--out", str(tmp_path / "ds")]) == 0
    report = tmp_path / "r.json"
    args = ["evaluate", "--config", str(tmp_path / "fast.yaml"), "--dataset", str(tmp_path / "ds"), "--report", str(report)]
    assert main(args) == 0
    doc = json.loads(report.read_text())
    assert doc["labels"] == ["idle", "wave"] and len(doc["runs"]) == 1
    assert (tmp_path / "r.txt").read_text().startswith("truth")
    assert "accuracy" in capsys.readouterr().out


def test_error_paths(tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path), "--out", str(tmp_path / "b.json")]) == 1
    assert "error [load] " in capsys.readouterr().err
    assert main(["synth", "--spec", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1
    assert "error [synth]" in capsys.readouterr().err
    assert main(["convert", "--input", str(tmp_path), "--out", str(tmp_path / "o")]) == 1
    assert "error [convert]" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("K: 0\n")
    assert main(["train", "--config", str(bad), "--dataset", str(tmp_path), "--out", str(tmp_path / "b.json")]) == 1
    assert "error [config]" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dstr.cli", "train", "--dataset", str(tmp_path), "--out", "x"], capture_output=True, text=True)
    assert r.returncode == 1 and r.stderr.startswith("error [load]")
    r = subprocess.run([sys.executable, "-m", "dstr.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "evaluate" in r.stdout
