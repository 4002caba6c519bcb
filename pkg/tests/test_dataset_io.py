import numpy as np
import pytest

from ontrack.core.exceptions import DatasetError
from ontrack.models.boxes import BBox
from ontrack.models.reports import EvalProtocol, RunMeta
from ontrack.services.dataset_io import (
    frame_path,
    read_boxes,
    read_meta,
    read_sequence,
    to_float,
    to_uint8,
    write_boxes,
    write_meta,
    write_sequence,
)


def test_boxes_are_written_exactly(tmp_path, rng):
    # quarter-pixel boxes survive the xywh conversion bit for bit
    boxes = [BBox.from_xywh(*(rng.integers(0, 200, 4) / 4.0 + [0.0, 0.0, 1.0, 1.0])) for _ in range(5)]
    write_boxes(tmp_path / "r.txt", boxes)
    assert read_boxes(tmp_path / "r.txt") == boxes


def test_read_boxes_accepts_mixed_separators(tmp_path):
    (tmp_path / "gt.txt").write_text("1,2,3,4\n5\t6\t7\t8\n\n9 10, 11 12\n")
    boxes = read_boxes(tmp_path / "gt.txt")
    assert [b.to_xywh() for b in boxes] == [(1, 2, 3, 4), (5, 6, 7, 8), (9, 10, 11, 12)]


def test_malformed_line_names_its_number(tmp_path):
    (tmp_path / "gt.txt").write_text("1,2,3,4\n1,2,3\n")
    with pytest.raises(DatasetError, match=":2:"):
        read_boxes(tmp_path / "gt.txt")
    (tmp_path / "bad.txt").write_text("1,2,0,4\n")
    with pytest.raises(DatasetError):
        read_boxes(tmp_path / "bad.txt")


def test_missing_file_raises(tmp_path):
    with pytest.raises(DatasetError):
        read_boxes(tmp_path / "missing.txt")


def test_frame_names_are_one_based(tmp_path):
    assert frame_path(tmp_path, 0) == tmp_path / "img" / "0001.ppm"
    assert frame_path(tmp_path, 41).name == "0042.ppm"


def test_sequence_round_trip(tmp_path, rng):
    frames = [rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8) for _ in range(3)]
    boxes = [BBox.from_xywh(1, 1, 4, 4)] * 3
    write_sequence(tmp_path, frames, boxes)
    read_frames, read_gt = read_sequence(tmp_path)
    assert read_gt == boxes
    assert all(np.array_equal(a, b) for a, b in zip(frames, read_frames))


def test_sequence_count_mismatch_raises(tmp_path, rng):
    frames = [rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8) for _ in range(2)]
    write_sequence(tmp_path, frames, [BBox.from_xywh(1, 1, 2, 2)] * 2)
    write_boxes(tmp_path / "groundtruth_rect.txt", [BBox.from_xywh(1, 1, 2, 2)] * 3)
    with pytest.raises(DatasetError, match="2 frames but 3"):
        read_sequence(tmp_path)
    with pytest.raises(DatasetError):
        read_sequence(tmp_path / "nowhere")


def test_meta_round_trip(tmp_path):
    meta = RunMeta(config_hash="abc", seed=3, fps=12.5, frames=10, protocol=EvalProtocol.VOT, failures=1)
    write_meta(tmp_path / "meta.json", meta)
    assert read_meta(tmp_path / "meta.json") == meta


def test_pixel_conversions():
    frame = np.array([[[0, 128, 255]]], dtype=np.uint8)
    assert np.array_equal(to_uint8(to_float(frame)), frame)
    assert to_uint8(np.array([[[1.5, -0.2, 0.5]]])).tolist() == [[[255, 0, 128]]]
