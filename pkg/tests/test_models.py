import pytest
from pydantic import ValidationError

from ontrack.models.boxes import BBox
from ontrack.models.configs import AugmentationConfig, BackboneConfig, ClsFusionConfig, RmgConfig, TrackerConfig
from ontrack.models.reports import AblationRow, AblationTable


def test_bbox_conversions():
    box = BBox.from_xywh(1.0, 2.0, 4.0, 6.0)
    assert box.to_xywh() == (1.0, 2.0, 4.0, 6.0)
    assert box.center == (3.0, 5.0)
    assert box.area == 24.0
    assert BBox.from_center(3.0, 5.0, 4.0, 6.0) == box


def test_bbox_rejects_empty_and_non_finite():
    with pytest.raises(ValidationError):
        BBox(x0=1, y0=0, x1=1, y1=2)
    with pytest.raises(ValidationError):
        BBox(x0=0, y0=0, x1=float("inf"), y1=2)


def test_bbox_frame_relations():
    box = BBox.from_xywh(-5, -5, 10, 10)
    assert box.intersects(100, 100)
    assert not box.inside(100, 100)
    assert not BBox.from_xywh(100, 0, 5, 5).intersects(100, 100)


def test_default_augmentation_total():
    assert AugmentationConfig().total == 23


def test_config_validation():
    with pytest.raises(ValidationError):
        BackboneConfig(search_size=100)
    with pytest.raises(ValidationError):
        RmgConfig(lambda_reg=1.5)
    with pytest.raises(ValidationError):
        ClsFusionConfig(alpha=0.0, beta=0.0)
    with pytest.raises(ValidationError):
        TrackerConfig(classifier=ClsFusionConfig(memory_capacity=10))
    with pytest.raises(ValidationError):
        TrackerConfig(unknown=1)


def test_with_seed_propagates():
    cfg = TrackerConfig().with_seed(7)
    assert cfg.seed == 7
    assert cfg.backbone.seed == 7
    assert cfg.rmg.generator_seed == 8


def test_ablation_table_text_handles_missing_metrics():
    table = AblationTable(
        title="t",
        rows=[AblationRow(arm="a", mean_iou=0.5, auc=0.4, failures=1.0), AblationRow(arm="b", metrics={"loss": 2.0})],
    )
    text = table.to_text()
    assert "0.5000" in text
    assert "loss=2" in text


def test_classifier_kernel_sizes_per_grid():
    cfg = ClsFusionConfig(kernel_size_low=3, kernel_size_high=7)
    assert cfg.kernel_size(high_res=False) == 3
    assert cfg.kernel_size(high_res=True) == 7
    with pytest.raises(ValidationError):
        ClsFusionConfig(refresh_start="cold")
