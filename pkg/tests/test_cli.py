import json
import logging

import pytest

from ontrack.cli.main import main
from ontrack.models.boxes import BBox
from ontrack.services.dataset_io import write_boxes

SMALL = ["--set", "backbone.search_size=144", "--set", "backbone.feature_channels=8"]


def test_usage_errors_exit_with_2():
    assert main([]) == 2
    assert main(["fly"]) == 2
    assert main(["eval", "--results", "r.txt"]) == 2


def test_selftest_exits_zero(capsys):
    assert main(["selftest"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_eval_length_mismatch_reports_counts(tmp_path, capsys):
    write_boxes(tmp_path / "results.txt", [BBox.from_xywh(1, 1, 4, 4)] * 2)
    write_boxes(tmp_path / "seq" / "groundtruth_rect.txt", [BBox.from_xywh(1, 1, 4, 4)] * 3)
    code = main(["eval", "--results", str(tmp_path / "results.txt"), "--dataset", str(tmp_path / "seq")])
    assert code == 1
    assert "2 predictions but 3" in capsys.readouterr().err


def test_failures_are_logged_with_traceback(tmp_path, caplog):
    write_boxes(tmp_path / "results.txt", [BBox.from_xywh(1, 1, 4, 4)])
    write_boxes(tmp_path / "seq" / "groundtruth_rect.txt", [BBox.from_xywh(1, 1, 4, 4)] * 2)
    with caplog.at_level(logging.ERROR, logger="ontrack"):
        assert main(["eval", "--results", str(tmp_path / "results.txt"), "--dataset", str(tmp_path / "seq")]) == 1
    failures = [r for r in caplog.records if r.levelno == logging.ERROR and "eval failed" in r.getMessage()]
    assert failures
    assert failures[0].exc_info is not None
    assert failures[0].exc_info[0] is not None


def test_eval_writes_text_and_json(tmp_path, capsys):
    boxes = [BBox.from_xywh(1, 1, 4, 4)] * 3
    write_boxes(tmp_path / "results.txt", boxes)
    write_boxes(tmp_path / "seq" / "groundtruth_rect.txt", boxes)
    code = main([
        "eval", "--results", str(tmp_path / "results.txt"), "--dataset", str(tmp_path / "seq"),
        "--protocol", "vot", "--json", str(tmp_path / "report.json"),
    ])
    assert code == 0
    assert "auc" in capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["auc"] == 1.0 and report["failures"] == 0


def test_invalid_config_value_fails_cleanly(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "seq"), "--set", "frames=1"]) == 1
    assert "error" in capsys.readouterr().err


def test_synth_writes_a_dataset(tmp_path):
    out = tmp_path / "seq"
    assert main(["synth", "--out", str(out), "--set", "frames=3", "--set", "seed=4"]) == 0
    assert (out / "groundtruth_rect.txt").read_text().count("\n") == 3
    assert len(list((out / "img").glob("*.ppm"))) == 3


@pytest.mark.slow
def test_track_runs_are_byte_identical(tmp_path):
    seq = tmp_path / "seq"
    spec = ["--set", "frames=8", "--set", "canvas_height=160", "--set", "canvas_width=160",
            "--set", "target_width=32", "--set", "target_height=24"]
    assert main(["synth", "--out", str(seq), *spec]) == 0
    first, second = tmp_path / "a" / "results.txt", tmp_path / "b" / "results.txt"
    assert main(["track", "--dataset", str(seq), "--results", str(first), *SMALL]) == 0
    assert main(["track", "--dataset", str(seq), "--results", str(second), *SMALL]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a" / "meta.json").exists()
    assert main(["eval", "--results", str(first), "--dataset", str(seq)]) == 0


@pytest.mark.slow
def test_bench_prints_stage_table(capsys):
    assert main(["bench", "--frames", "3", *SMALL]) == 0
    out = capsys.readouterr().out
    for stage in ("crop", "features", "scores", "regression"):
        assert stage in out
