"""Regression model generator.

A dynamic generator turns ROI-pooled target features into an initial
regression filter; a rectifier then runs steepest descent on supervision
built strictly from first-frame ground truth. The static model comes from
the augmented first-frame samples; online models come from tracked frames
and are fused into the model in use.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ontrack.core.exceptions import ShapeError
from ontrack.core.geometry import encode_targets, nearest_grid, vicinity
from ontrack.core.optimizer import LsqProblem, steepest_descent
from ontrack.core.tensor_ops import FeatureMap, LinearFilter, im2col, prroi_pool
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import RmgConfig

logger = get_logger(__name__)

# Filter with out_channels = 4, ordered (l, r, t, b)
RegModel = LinearFilter


@dataclass(frozen=True)
class RegSample:
    """Regression features of one frame with the box they were cropped for (crop coordinates)."""

    features: FeatureMap
    box: BBox
    is_first_frame: bool = False


def reg_filter_shape(channels: int, cfg: RmgConfig) -> Tuple[int, int, int, int]:
    return (4, channels, cfg.kernel_size, cfg.kernel_size)


def _generator_map(channels: int, cfg: RmgConfig) -> Optional[np.ndarray]:
    """(4, C, C) channel map of the seeded generator; None for the broadcast one."""
    if cfg.generator == "broadcast":
        return None
    rng = np.random.default_rng(cfg.generator_seed)
    return rng.standard_normal((4, channels, channels)) / np.sqrt(channels)


def dynamic_generate(samples: Sequence[RegSample], cfg: RmgConfig, shape: Tuple[int, int, int, int]) -> RegModel:
    """Initial filter from the mean ROI-pooled target patch.

    The broadcast generator copies the pooled (C, k, k) patch into all four
    side filters scaled by 1/(C*k*k); the seeded one mixes channels first.
    """
    if not samples:
        raise ValueError("dynamic_generate needs at least one sample")
    out_channels, channels, kh, kw = shape
    if out_channels != 4:
        raise ShapeError(f"regression filters have 4 outputs, got {out_channels}")
    pooled = np.zeros((channels, kh, kw))
    for sample in samples:
        if sample.features.channels != channels:
            raise ShapeError(f"sample has {sample.features.channels} channels, filter expects {channels}")
        pooled += prroi_pool(sample.features, sample.box, kh, kw, cfg.pool_samples_per_bin).data
    pooled /= len(samples)
    pooled /= channels * kh * kw

    mixing = _generator_map(channels, cfg)
    if mixing is None:
        weights = np.broadcast_to(pooled, shape).copy()
    else:
        weights = np.einsum("ocd,dij->ocij", mixing, pooled)
    return LinearFilter(weights)


def build_supervision(
    samples: Sequence[RegSample],
    radius: int,
    eta: float,
    kernel_size: int = 3,
) -> LsqProblem:
    """One supervision point per vicinity cell of each sample's box center.

    The patch at a cell is the same-zero correlation window there and the
    target is the (l, r, t, b) offset vector of the sample's box.
    """
    if not samples:
        raise ValueError("build_supervision needs at least one sample")
    patches, targets = [], []
    for sample in samples:
        feat = sample.features
        s = feat.stride
        center = nearest_grid(sample.box.center, s, feat.height, feat.width)
        offsets = encode_targets(sample.box, feat.height, feat.width, s)
        cols = im2col(feat, kernel_size)
        for row, col in vicinity(center, radius, feat.height, feat.width):
            patches.append(cols[row * feat.width + col])
            targets.append(offsets.data[:, row, col])
    channels = samples[0].features.channels
    return LsqProblem(
        patches=np.stack(patches),
        targets=np.stack(targets),
        weights=np.ones(len(patches)),
        eta=eta,
        filter_shape=(4, channels, kernel_size, kernel_size),
    )


def first_frame_supervision(first_frame_samples: Sequence[RegSample], cfg: RmgConfig) -> LsqProblem:
    if not all(s.is_first_frame for s in first_frame_samples):
        raise ValueError("rectification supervision must come from first-frame samples only")
    return build_supervision(first_frame_samples, cfg.vicinity_radius, cfg.eta, cfg.kernel_size)


def rectify(
    f: RegModel,
    first_frame_samples: Sequence[RegSample],
    cfg: RmgConfig,
    iters: int,
    supervision: Optional[LsqProblem] = None,
) -> RegModel:
    """Steepest descent on first-frame supervision; ``supervision`` may be passed prebuilt."""
    problem = supervision if supervision is not None else first_frame_supervision(first_frame_samples, cfg)
    return steepest_descent(f, problem, iters)


def make_static_model(
    first_frame_samples: Sequence[RegSample],
    cfg: RmgConfig,
    supervision: Optional[LsqProblem] = None,
) -> RegModel:
    if not first_frame_samples:
        raise ValueError("make_static_model needs first-frame samples")
    shape = reg_filter_shape(first_frame_samples[0].features.channels, cfg)
    initial = dynamic_generate(first_frame_samples, cfg, shape)
    model = rectify(initial, first_frame_samples, cfg, cfg.rect_iters_init, supervision)
    logger.info(f"[RMG] Static model from {len(first_frame_samples)} samples, {cfg.rect_iters_init} rectifier steps")
    return model


def make_online_model(
    online_samples: Sequence[RegSample],
    first_frame_samples: Sequence[RegSample],
    cfg: RmgConfig,
    supervision: Optional[LsqProblem] = None,
) -> RegModel:
    """Dynamic model from tracked samples, rectified on first-frame ground truth only."""
    if not online_samples:
        raise ValueError("make_online_model needs online samples")
    shape = reg_filter_shape(online_samples[0].features.channels, cfg)
    initial = dynamic_generate(online_samples, cfg, shape)
    model = rectify(initial, first_frame_samples, cfg, cfg.rect_iters_update, supervision)
    logger.debug(f"[RMG] Online model from {len(online_samples)} samples")
    return model


def fuse(f_on: RegModel, f_st: RegModel, cfg: RmgConfig) -> RegModel:
    """lambda * f_on + (1 - lambda) * f_st, restricted to input channels [0, C/2) with half_update.

    Weights where both models agree are copied unchanged.
    """
    if f_on.shape != f_st.shape:
        raise ShapeError(f"cannot fuse filters of shapes {f_on.shape} and {f_st.shape}")
    lam = cfg.lambda_reg
    on, st = f_on.weights, f_st.weights
    mixed = np.where(on == st, st, lam * on + (1.0 - lam) * st)
    if cfg.half_update:
        half = f_st.in_channels // 2
        fused = st.copy()
        fused[:, :half] = mixed[:, :half]
    else:
        fused = mixed
    return LinearFilter(fused)
