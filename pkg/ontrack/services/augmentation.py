"""First-frame data augmentation: translations, rotations and Gaussian blurs."""
from typing import List, Tuple

import cv2
import numpy as np

from ontrack.core.exceptions import GeometryError
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import AugmentationConfig
from ontrack.services.backbone import as_image

logger = get_logger(__name__)

Sample = Tuple[np.ndarray, BBox]


def _warp(image: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    return cv2.warpAffine(
        image,
        matrix,
        (w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_REPLICATE,
    )


def translate(image: np.ndarray, box: BBox, dx: float, dy: float) -> Sample:
    """Shift image content and box by (dx, dy) pixels."""
    matrix = np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]])
    return _warp(image, matrix), box.translate(dx, dy)


def rotate(image: np.ndarray, box: BBox, degrees: float) -> Sample:
    """Rotate about the box center; the box is kept as is."""
    cx, cy = box.center
    # cv2 pixel centers sit at integer coordinates
    matrix = cv2.getRotationMatrix2D((cx - 0.5, cy - 0.5), degrees, 1.0)
    return _warp(image, matrix), box


def blur(image: np.ndarray, box: BBox, sigma: float) -> Sample:
    return cv2.GaussianBlur(image, (0, 0), sigmaX=sigma, sigmaY=sigma, borderType=cv2.BORDER_REPLICATE), box


def augment_first_frame(frame: np.ndarray, box: BBox, cfg: AugmentationConfig) -> List[Sample]:
    """Original, then +-x/+-y shifts per fraction, +- rotations, then blurs.

    Shifts are fractions of the box width along x and of its height along y.
    With the default config this yields 23 samples.
    """
    frame = as_image(frame)
    h, w = frame.shape[:2]
    if not box.inside(h, w):
        raise GeometryError(f"box outside frame: {box} in a {h}x{w} image")

    samples: List[Sample] = [(frame.copy(), box)]
    for fraction in cfg.shift_fractions:
        dx, dy = fraction * box.width, fraction * box.height
        for sx, sy in ((dx, 0.0), (-dx, 0.0), (0.0, dy), (0.0, -dy)):
            samples.append(translate(frame, box, sx, sy))
    for degrees in cfg.rotation_degrees:
        samples.append(rotate(frame, box, degrees))
        samples.append(rotate(frame, box, -degrees))
    for sigma in cfg.blur_sigmas:
        samples.append(blur(frame, box, sigma))

    logger.debug(f"[Augment] {len(samples)} first-frame samples")
    return samples
