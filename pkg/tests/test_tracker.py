import numpy as np
import pytest

from ontrack.core.exceptions import TrackerStateError
from ontrack.core.geometry import iou
from ontrack.models.boxes import BBox
from ontrack.models.configs import SynthSpec, TrackerConfig
from ontrack.models.reports import TrackEventKind
from ontrack.services.dataset_io import to_float
from ontrack.services.runner import track_sequence
from ontrack.services.synth import render_sequence
from ontrack.services.tracker import Tracker, constrain_box, init, track_frame


def test_constrain_box_bounds_scale_and_center():
    cfg = TrackerConfig()
    previous = BBox.from_center(50, 50, 20, 20)
    grown = constrain_box(BBox.from_center(50, 50, 100, 10), previous, cfg, (100, 100))
    assert grown.width == pytest.approx(25.0)
    assert grown.height == pytest.approx(16.0)
    moved = constrain_box(BBox.from_center(150, -5, 20, 20), previous, cfg, (100, 100))
    assert moved.center == (100.0, 0.0)


def test_constrain_box_applies_min_size():
    cfg = TrackerConfig(min_box_size=4.0)
    small = constrain_box(BBox.from_center(10, 10, 2, 2), BBox.from_center(10, 10, 2.2, 2.2), cfg, (50, 50))
    assert small.width == 4.0 and small.height == 4.0


def test_track_before_init_raises():
    with pytest.raises(TrackerStateError):
        Tracker(TrackerConfig()).track(np.zeros((32, 32, 3)))
    with pytest.raises(TrackerStateError):
        track_frame(None, np.zeros((32, 32, 3)))


@pytest.mark.slow
def test_init_builds_models_and_memories(small_cfg, short_spec):
    sequence = render_sequence(short_spec)
    state = init(to_float(sequence.frames[0]), sequence.boxes[0], small_cfg)
    assert state.frame_index == 0
    assert state.current_model is state.static_model
    assert state.static_model.shape == (4, 8, 3, 3)
    assert len(state.cls_memory) == 23
    assert len(state.reg_memory.first_frame) == 23
    assert len(state.reg_memory) == 0
    assert state.supervision.patches.shape[0] == 23 * 25


@pytest.mark.slow
def test_tracking_emits_boxes_and_schedule_events(small_cfg, short_spec):
    cfg = small_cfg.model_copy(update={
        "rmg": small_cfg.rmg.model_copy(update={"update_interval": 5}),
        "classifier": small_cfg.classifier.model_copy(update={"update_interval": 5}),
        "confidence_threshold": 0.0,
    })
    sequence = render_sequence(short_spec)
    events = []
    tracker = Tracker(cfg, on_event=events.append)
    tracker.init(to_float(sequence.frames[0]), sequence.boxes[0])
    for frame in sequence.frames[1:]:
        box, confidence = tracker.track(to_float(frame))
        assert isinstance(box, BBox)
        assert np.isfinite(confidence)
    kinds = [e.kind for e in events]
    rebuilds = [e.frame_index for e in events if e.kind == TrackEventKind.ONLINE_REG_REBUILD]
    refreshes = [e.frame_index for e in events if e.kind == TrackEventKind.CLS_REFRESH]
    assert rebuilds == [5, 10]
    assert refreshes == [5, 10]
    assert kinds.count(TrackEventKind.REG_SAMPLE_ADMITTED) == len(sequence.frames) - 1
    assert kinds.count(TrackEventKind.CLS_SAMPLE_ADMITTED) == 2
    assert tracker.state.online_model is not None
    assert len(tracker.state.reg_memory) == len(sequence.frames) - 1


@pytest.mark.slow
def test_low_confidence_holds_position(small_cfg, short_spec):
    cfg = small_cfg.model_copy(update={"confidence_threshold": 1e9})
    sequence = render_sequence(short_spec)
    events = []
    tracker = Tracker(cfg, on_event=events.append)
    tracker.init(to_float(sequence.frames[0]), sequence.boxes[0])
    box, _ = tracker.track(to_float(sequence.frames[1]))
    assert box == sequence.boxes[0]
    assert [e.kind for e in events] == [TrackEventKind.LOW_CONFIDENCE]
    assert len(tracker.state.reg_memory) == 0


@pytest.mark.slow
def test_runs_are_deterministic(small_cfg, short_spec):
    sequence = render_sequence(short_spec)
    a = track_sequence(sequence.frames, sequence.boxes, small_cfg)
    b = track_sequence(sequence.frames, sequence.boxes, small_cfg)
    assert a.boxes == b.boxes
    assert a.confidences == b.confidences


@pytest.mark.slow
def test_zero_fusion_rate_matches_static_only_run(small_cfg, short_spec):
    online = small_cfg.model_copy(update={"rmg": small_cfg.rmg.model_copy(update={"update_interval": 4, "lambda_reg": 0.0})})
    static = online.model_copy(update={"online_regression": False})
    sequence = render_sequence(short_spec)
    a = track_sequence(sequence.frames, sequence.boxes, online)
    b = track_sequence(sequence.frames, sequence.boxes, static)
    assert a.boxes == b.boxes


@pytest.fixture(scope="module")
def seed_zero():
    return render_sequence(SynthSpec(frames=100, seed=0))


@pytest.mark.slow
def test_repeated_first_frame_reproduces_the_box(seed_zero):
    events = []
    tracker = Tracker(TrackerConfig(), on_event=events.append)
    tracker.init(to_float(seed_zero.frames[0]), seed_zero.boxes[0])
    box, confidence = tracker.track(to_float(seed_zero.frames[0]))
    assert confidence == pytest.approx(1.0)
    assert iou(box, seed_zero.boxes[0]) >= 0.9
    assert TrackEventKind.LOW_CONFIDENCE not in [e.kind for e in events]


@pytest.mark.slow
def test_second_frame_overlaps_ground_truth(seed_zero):
    tracker = Tracker(TrackerConfig())
    tracker.init(to_float(seed_zero.frames[0]), seed_zero.boxes[0])
    box, confidence = tracker.track(to_float(seed_zero.frames[1]))
    assert iou(box, seed_zero.boxes[1]) >= 0.5
    assert confidence >= TrackerConfig().confidence_threshold


@pytest.mark.slow
def test_tracks_the_seed_zero_translation_sequence(seed_zero):
    result = track_sequence(seed_zero.frames, seed_zero.boxes, TrackerConfig(), protocol="vot")
    overlaps = [iou(p, g) for p, g in zip(result.boxes, seed_zero.boxes)]
    assert result.failures == 0
    assert np.mean(overlaps) >= 0.7
