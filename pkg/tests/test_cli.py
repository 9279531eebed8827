import json

import pytest

from dualtrack import io
from dualtrack.cli import main


@pytest.fixture(scope="module")
def single(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--scene", "single", "--out", str(root / "data"), "--seed", "2"]) == 0
    (root / "fast.cfg").write_text("n_sp = 200\nlearn_stride = 4\n")
    return root


def test_synth_layout(single):
    names = sorted(p.name for p in (single / "data").iterdir())
    assert names == ["background.ppm", "flow", "gt_masks", "gt_tracks.csv", "init.csv", "seq"]
    assert len(io.load_sequence(single / "data" / "seq")) == 11


def test_joint_run_scores_well(single, capsys):
    data, out = single / "data", single / "joint"
    rc = main(["joint", "--seq", str(data / "seq"), "--init", str(data / "init.csv"), "--out", str(out),
               "--config", str(single / "fast.cfg"), "--flow-dir", str(data / "flow"),
               "--background", str(data / "background.ppm")])
    assert rc == 0 and "joint: 11 frames, 1 targets" in capsys.readouterr().out
    assert main(["eval", "--gt", str(data), "--pred", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["MOTA"] >= 0.9 and metrics["IDS"] == 0
    assert "identity_iou" in metrics
    assert (out / "metrics.txt").read_text().startswith("MOTA=")


def test_track_subcommand_defaults_to_tracking_only(single):
    data, out = single / "data", single / "track"
    assert main(["track", "--seq", str(data / "seq"), "--init", str(data / "init.csv"), "--out", str(out),
                 "--config", str(single / "fast.cfg")]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["tracks.csv"]


def test_eval_gt_against_itself(single, tmp_path, capsys):
    pred = tmp_path / "pred"
    pred.mkdir()
    (pred / "tracks.csv").write_text((single / "data" / "gt_tracks.csv").read_text())
    assert main(["eval", "--gt", str(single / "data"), "--pred", str(pred), "--out", str(tmp_path / "m")]) == 0
    out = capsys.readouterr().out
    assert "MOTA=1.0" in out and "IDS=0" in out
    assert (tmp_path / "m" / "metrics.json").exists()


@pytest.mark.parametrize("args, message", [
    (["joint", "--seq", "/nonexistent", "--init", "x.csv", "--out", "o"], "not a directory"),
    (["eval", "--gt", "/nonexistent", "--pred", "/nonexistent"], "no tracks.csv"),
])
def test_errors_exit_nonzero(args, message, capsys):
    assert main(args) == 1
    assert message in capsys.readouterr().err


def test_bad_config_is_reported(single, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_sp = lots\n")
    data = single / "data"
    rc = main(["track", "--seq", str(data / "seq"), "--init", str(data / "init.csv"), "--out", str(tmp_path / "o"),
               "--config", str(bad)])
    assert rc == 1 and "n_sp" in capsys.readouterr().err
