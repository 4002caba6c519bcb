"""Deterministic stand-in backbone: search-region cropping and two-scale features.

Images are (H, W, 3) float arrays with values in [0, 1]. Box and point
coordinates are continuous: pixel ``i`` covers ``[i, i + 1)``.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ontrack.core.exceptions import GeometryError, ShapeError
from ontrack.core.tensor_ops import FeatureMap, bilinear_sample
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import BackboneConfig

logger = get_logger(__name__)

FEATURE_STRIDE = 4
LOW_RES_POOL = 4
BASE_CHANNELS = 8
# Level of the constant channel that gives every linear head a bias term
BIAS_LEVEL = 4.0
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(image: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) image and return it as float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or min(arr.shape[:2]) < 1:
        raise ShapeError(f"image must have shape (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


@dataclass(frozen=True)
class CropTransform:
    """Affine map ``crop = (image - origin) * scale`` between image and crop coordinates."""

    origin_x: float
    origin_y: float
    scale: float
    size: int

    @property
    def side(self) -> float:
        """Crop side in image pixels before resampling."""
        return self.size / self.scale

    def point_to_crop(self, x: float, y: float) -> Tuple[float, float]:
        return ((x - self.origin_x) * self.scale, (y - self.origin_y) * self.scale)

    def point_to_image(self, u: float, v: float) -> Tuple[float, float]:
        return (u / self.scale + self.origin_x, v / self.scale + self.origin_y)

    def box_to_crop(self, box: BBox) -> BBox:
        x0, y0 = self.point_to_crop(box.x0, box.y0)
        x1, y1 = self.point_to_crop(box.x1, box.y1)
        return BBox(x0=x0, y0=y0, x1=x1, y1=y1)

    def box_to_image(self, box: BBox) -> BBox:
        x0, y0 = self.point_to_image(box.x0, box.y0)
        x1, y1 = self.point_to_image(box.x1, box.y1)
        return BBox(x0=x0, y0=y0, x1=x1, y1=y1)


def crop_search_region(image: np.ndarray, prior_box: BBox, cfg: BackboneConfig) -> Tuple[np.ndarray, CropTransform]:
    """Square crop around the prior box, resampled to ``search_size`` pixels.

    The side is ``search_area_factor * sqrt(w * h)``; area outside the frame
    is filled with the per-channel image mean.
    """
    image = as_image(image)
    h, w = image.shape[:2]
    if not prior_box.intersects(h, w):
        raise GeometryError(f"prior box {prior_box} lies outside the {h}x{w} frame")

    side = cfg.search_area_factor * np.sqrt(prior_box.width * prior_box.height)
    cx, cy = prior_box.center
    transform = CropTransform(
        origin_x=cx - side / 2.0,
        origin_y=cy - side / 2.0,
        scale=cfg.search_size / side,
        size=cfg.search_size,
    )

    # crop pixel u has its center at u + 0.5; image pixel index = continuous - 0.5
    centers = np.arange(cfg.search_size, dtype=np.float64) + 0.5
    xs = centers / transform.scale + transform.origin_x - 0.5
    ys = centers / transform.scale + transform.origin_y - 0.5
    data = np.moveaxis(image, 2, 0)
    crop = bilinear_sample(data, ys[:, None], xs[None, :])
    outside = (ys[:, None] < -0.5) | (ys[:, None] > h - 0.5) | (xs[None, :] < -0.5) | (xs[None, :] > w - 0.5)
    if np.any(outside):
        mean = data.reshape(3, -1).mean(axis=1)
        crop = np.where(outside[None, :, :], mean[:, None, None], crop)
    return np.moveaxis(crop, 0, 2), transform


def base_channels(crop: np.ndarray) -> np.ndarray:
    """Per-pixel base responses: gray, |dx|, |dy|, 4 orientation bins and a constant, shape (8, H, W)."""
    gray = crop @ GRAY_WEIGHTS
    dx = np.zeros_like(gray)
    dy = np.zeros_like(gray)
    dx[:, 1:-1] = 0.5 * (gray[:, 2:] - gray[:, :-2])
    dy[1:-1, :] = 0.5 * (gray[2:, :] - gray[:-2, :])
    magnitude = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    bins = [magnitude * np.maximum(0.0, np.cos(2.0 * theta - b * np.pi / 2.0)) for b in range(4)]
    return np.stack([gray, np.abs(dx), np.abs(dy), *bins, np.full_like(gray, BIAS_LEVEL)])


def average_pool(data: np.ndarray, factor: int) -> np.ndarray:
    c, h, w = data.shape
    if h % factor or w % factor:
        raise ShapeError(f"map {h}x{w} is not divisible by pool factor {factor}")
    return data.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


@dataclass(frozen=True)
class BranchFeatures:
    """Feature maps of one search region for both heads."""

    cls18: FeatureMap
    cls72: FeatureMap
    reg72: FeatureMap


class FeatureExtractor:
    """Fixed filter bank followed by a seeded linear channel mixing.

    With ``separate_heads`` the regression branch gets its own mixing;
    otherwise both heads share the same maps.
    """

    def __init__(self, cfg: BackboneConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        scale = 1.0 / np.sqrt(BASE_CHANNELS)
        self.cls_mixing = rng.standard_normal((cfg.feature_channels, BASE_CHANNELS)) * scale
        if cfg.separate_heads:
            self.reg_mixing = rng.standard_normal((cfg.feature_channels, BASE_CHANNELS)) * scale
        else:
            self.reg_mixing = self.cls_mixing
        self.cls_mixing.setflags(write=False)
        self.reg_mixing.setflags(write=False)

    @property
    def grid_size(self) -> int:
        return self.cfg.search_size // FEATURE_STRIDE

    def _check_crop(self, crop: np.ndarray) -> np.ndarray:
        crop = as_image(crop)
        size = self.cfg.search_size
        if crop.shape[:2] != (size, size):
            raise ShapeError(f"crop must be {size}x{size}, got {crop.shape[0]}x{crop.shape[1]}")
        return crop

    def _maps(self, base: np.ndarray, mixing: np.ndarray) -> Tuple[FeatureMap, FeatureMap]:
        high = average_pool(np.tensordot(mixing, base, axes=1), FEATURE_STRIDE)
        low = average_pool(high, LOW_RES_POOL)
        return (
            FeatureMap(high, stride=float(FEATURE_STRIDE)),
            FeatureMap(low, stride=float(FEATURE_STRIDE * LOW_RES_POOL)),
        )

    def extract(self, crop: np.ndarray) -> BranchFeatures:
        base = base_channels(self._check_crop(crop))
        cls72, cls18 = self._maps(base, self.cls_mixing)
        reg72 = cls72 if self.reg_mixing is self.cls_mixing else self._maps(base, self.reg_mixing)[0]
        return BranchFeatures(cls18=cls18, cls72=cls72, reg72=reg72)


def extract_features(crop: np.ndarray, cfg: BackboneConfig) -> Tuple[FeatureMap, FeatureMap]:
    """(high-res stride-4 map, low-res stride-16 map) of the classification branch."""
    features = FeatureExtractor(cfg).extract(crop)
    return features.cls72, features.cls18
