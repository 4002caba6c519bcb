import numpy as np
import pytest

from ontrack.core.exceptions import GeometryError, ShapeError
from ontrack.models.boxes import BBox
from ontrack.models.configs import BackboneConfig
from ontrack.services.backbone import (
    BIAS_LEVEL,
    FeatureExtractor,
    as_image,
    base_channels,
    crop_search_region,
    extract_features,
)

CFG = BackboneConfig(search_size=144, feature_channels=8)


def test_crop_has_search_size_and_maps_box_center_to_crop_center(rng):
    image = rng.uniform(size=(120, 160, 3))
    box = BBox.from_xywh(60.0, 40.0, 30.0, 20.0)
    crop, transform = crop_search_region(image, box, CFG)
    assert crop.shape == (144, 144, 3)
    assert transform.point_to_crop(*box.center) == pytest.approx((72.0, 72.0))
    assert transform.side == pytest.approx(5.0 * np.sqrt(600.0))


def test_crop_transform_round_trip(rng):
    _, transform = crop_search_region(rng.uniform(size=(100, 100, 3)), BBox.from_xywh(30, 30, 20, 20), CFG)
    box = BBox.from_xywh(33.5, 28.25, 17.0, 22.0)
    back = transform.box_to_image(transform.box_to_crop(box))
    np.testing.assert_allclose(back.to_xywh(), box.to_xywh(), atol=1e-9)


def test_crop_outside_frame_uses_channel_mean():
    image = np.zeros((50, 50, 3))
    image[..., 0] = 0.2
    image[..., 2] = 0.8
    crop, _ = crop_search_region(image, BBox.from_xywh(0, 0, 20, 20), CFG)
    np.testing.assert_allclose(crop[0, 0], [0.2, 0.0, 0.8])
    np.testing.assert_allclose(crop[-1, -1], [0.2, 0.0, 0.8])


def test_crop_prior_outside_frame_raises(rng):
    with pytest.raises(GeometryError):
        crop_search_region(rng.uniform(size=(50, 50, 3)), BBox.from_xywh(60, 60, 10, 10), CFG)


def test_as_image_validates_shape():
    with pytest.raises(ShapeError):
        as_image(np.zeros((10, 10)))
    with pytest.raises(ValueError):
        as_image(np.full((2, 2, 3), np.nan))


def test_flat_image_has_no_gradient_responses():
    channels = base_channels(np.full((16, 16, 3), 0.5))
    assert channels.shape == (8, 16, 16)
    np.testing.assert_allclose(channels[0], 0.5)
    assert np.all(channels[1:7] == 0)
    assert np.all(channels[7] == BIAS_LEVEL)


def test_feature_shapes_and_strides(rng):
    features = FeatureExtractor(CFG).extract(rng.uniform(size=(144, 144, 3)))
    assert features.cls72.shape == (8, 36, 36) and features.cls72.stride == 4.0
    assert features.cls18.shape == (8, 9, 9) and features.cls18.stride == 16.0
    assert features.reg72 is features.cls72


def test_separate_heads_give_distinct_regression_features(rng):
    cfg = BackboneConfig(search_size=144, feature_channels=8, separate_heads=True)
    features = FeatureExtractor(cfg).extract(rng.uniform(size=(144, 144, 3)))
    assert features.reg72.shape == features.cls72.shape
    assert not np.allclose(features.reg72.data, features.cls72.data)


def test_extraction_is_deterministic(rng):
    crop = rng.uniform(size=(144, 144, 3))
    high_a, low_a = extract_features(crop, CFG)
    high_b, low_b = extract_features(crop, CFG)
    np.testing.assert_array_equal(high_a.data, high_b.data)
    np.testing.assert_array_equal(low_a.data, low_b.data)


def test_wrong_crop_size_raises(rng):
    with pytest.raises(ShapeError):
        FeatureExtractor(CFG).extract(rng.uniform(size=(100, 144, 3)))
