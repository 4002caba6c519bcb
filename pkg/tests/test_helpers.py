import pytest

from ontrack.config import Settings
from ontrack.core.exceptions import DatasetError
from ontrack.models.configs import SynthSpec, TrackerConfig
from ontrack.utils.helpers import (
    StageTimer,
    config_hash,
    load_model,
    load_tracker_config,
    maybe_stage,
    parse_config_text,
)


def test_parse_config_text():
    text = """
    # tracker settings
    rmg.lambda_reg = 0.4   # fusion
    rmg.half_update = false
    backbone.search_size = 144
    augmentation.blur_sigmas = [1.0, 2.0]
    rmg.generator = seeded
    """
    data = parse_config_text(text)
    assert data == {
        "rmg": {"lambda_reg": 0.4, "half_update": False, "generator": "seeded"},
        "backbone": {"search_size": 144},
        "augmentation": {"blur_sigmas": [1.0, 2.0]},
    }


def test_parse_errors_name_the_line():
    with pytest.raises(DatasetError, match="cfg:2"):
        parse_config_text("seed = 1\nnot an assignment\n", origin="cfg")
    with pytest.raises(DatasetError):
        parse_config_text("a = 1\na.b = 2\n")


def test_file_then_overrides_then_env_seed(tmp_path):
    path = tmp_path / "tracker.cfg"
    path.write_text("rmg.lambda_reg = 0.4\nseed = 2\n")
    cfg = load_tracker_config(str(path), ["rmg.lambda_reg=0.7"], settings=Settings(SEED=None))
    assert cfg.rmg.lambda_reg == 0.7 and cfg.seed == 2
    seeded = load_tracker_config(str(path), settings=Settings(SEED=9))
    assert seeded.seed == 9 and seeded.backbone.seed == 9


def test_env_seed_applies_to_synth_specs(monkeypatch):
    spec = load_model(SynthSpec, overrides=["frames=5"], settings=Settings(SEED=4))
    assert spec.seed == 4 and spec.frames == 5


def test_missing_config_file_raises(tmp_path):
    with pytest.raises(DatasetError):
        load_tracker_config(str(tmp_path / "missing.cfg"))


def test_config_hash_is_stable_and_sensitive():
    a = config_hash(TrackerConfig())
    assert a == config_hash(TrackerConfig())
    assert a != config_hash(TrackerConfig(seed=1))
    assert len(a) == 64


def test_stage_timer_accumulates():
    timer = StageTimer()
    for _ in range(3):
        with timer.stage("crop"):
            pass
    with maybe_stage(timer, "features"):
        pass
    with maybe_stage(None, "ignored"):
        pass
    report = {t.stage: t for t in timer.report()}
    assert set(report) == {"crop", "features"}
    assert report["crop"].calls == 3
