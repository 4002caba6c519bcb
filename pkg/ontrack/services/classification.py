"""Two-scale classification models, score fusion and the online classification memory.

Feature maps entering this branch are standardized per channel over the
search region (unless ``normalize_features`` is off), so label fitting and
scoring see zero-mean, unit-spread channels.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from ontrack.core.exceptions import ShapeError
from ontrack.core.geometry import ScoreMap, center_to_grid, gaussian_label, label_sigma
from ontrack.core.optimizer import GramProblem, steepest_descent
from ontrack.core.sample_memory import ClsMemory
from ontrack.core.tensor_ops import (
    FeatureMap,
    LinearFilter,
    PaddingMode,
    bilinear_resize,
    correlate2d,
    extract_patch,
    im2col,
    standardize_channels,
)
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import ClsFusionConfig

logger = get_logger(__name__)


def prepare_features(features: FeatureMap, cfg: ClsFusionConfig) -> FeatureMap:
    """Map handed to the classification filters: standardized per channel when configured."""
    return standardize_channels(features) if cfg.normalize_features else features


@dataclass(frozen=True)
class ClsModel:
    """Single-output classification filter for one scale."""

    filter: LinearFilter
    scale: int

    def __post_init__(self):
        if self.filter.out_channels != 1:
            raise ShapeError(f"classification filters have one output, got {self.filter.out_channels}")


@dataclass(frozen=True)
class ClsSample:
    """One frame's classification features and target box (crop coordinates).

    The maps are passed raw and kept in prepared form. The per-scale normal
    equations are computed on first use and cached.
    """

    frame_index: int
    feat18: FeatureMap
    feat72: FeatureMap
    box: BBox
    cfg: ClsFusionConfig

    def __post_init__(self):
        object.__setattr__(self, "feat18", prepare_features(self.feat18, self.cfg))
        object.__setattr__(self, "feat72", prepare_features(self.feat72, self.cfg))

    def center(self, features: FeatureMap) -> Tuple[float, float]:
        return center_to_grid(self.box.center, features.stride)

    def sigma(self, features: FeatureMap) -> float:
        if self.cfg.sigma is not None:
            return self.cfg.sigma
        return label_sigma(self.box, features.stride, self.cfg.sigma_factor)

    def features(self, high_res: bool) -> FeatureMap:
        return self.feat72 if high_res else self.feat18

    def problem(self, high_res: bool) -> GramProblem:
        return self.problem72 if high_res else self.problem18

    def _problem(self, high_res: bool) -> GramProblem:
        features = self.features(high_res)
        return label_problem(
            features, self.center(features), self.sigma(features), self.cfg.kernel_size(high_res), self.cfg.eta
        )

    @cached_property
    def problem18(self) -> GramProblem:
        return self._problem(high_res=False)

    @cached_property
    def problem72(self) -> GramProblem:
        return self._problem(high_res=True)


def resolve_sigma(cfg: ClsFusionConfig, sigma: Optional[float]) -> float:
    if cfg.sigma is not None:
        return cfg.sigma
    if sigma is None:
        raise ValueError("label sigma is neither configured nor given")
    return sigma


def label_problem(
    features: FeatureMap,
    center: Tuple[float, float],
    sigma: float,
    kernel_size: int,
    eta: float,
) -> GramProblem:
    """Normal equations with every grid position supervised by a Gaussian label at ``center``."""
    cols = im2col(features, kernel_size)
    label = gaussian_label(center, features.height, features.width, sigma).data.reshape(-1, 1)
    return GramProblem(
        gram=cols.T @ cols,
        cross=cols.T @ label,
        target_energy=float(np.sum(label ** 2)),
        total_weight=float(cols.shape[0]),
        eta=eta,
        filter_shape=(1, features.channels, kernel_size, kernel_size),
    )


def initial_cls_filter(samples: Sequence[Tuple[FeatureMap, Tuple[float, float]]], kernel_size: int) -> LinearFilter:
    """Mean target patch scaled by 1/(C*k*k)."""
    channels = samples[0][0].channels
    patch = np.zeros((channels, kernel_size, kernel_size))
    for features, (row, col) in samples:
        cell = (
            int(np.clip(np.floor(row + 0.5), 0, features.height - 1)),
            int(np.clip(np.floor(col + 0.5), 0, features.width - 1)),
        )
        patch += extract_patch(features, cell, kernel_size)
    patch /= len(samples) * channels * kernel_size ** 2
    return LinearFilter(patch[None])


def make_cls_model(
    samples: Sequence[Tuple[FeatureMap, Tuple[float, float]]],
    scale: int,
    cfg: ClsFusionConfig,
    sigma: Optional[float] = None,
    high_res: bool = False,
) -> ClsModel:
    """Fit a classification filter on Gaussian labels centered on each sample's target.

    ``samples`` pairs a raw feature map with the real-valued (row, col)
    target center on that map; ``sigma`` is in cells of that map and
    ``high_res`` selects the kernel size.
    """
    if not samples:
        raise ValueError("make_cls_model needs at least one sample")
    if any(features.height != scale for features, _ in samples):
        raise ShapeError(f"all samples must be on the {scale}-grid")
    sigma = resolve_sigma(cfg, sigma)
    k = cfg.kernel_size(high_res)
    prepared = [(prepare_features(features, cfg), center) for features, center in samples]
    problem = GramProblem.combine(
        label_problem(features, center, sigma, k, cfg.eta) for features, center in prepared
    )
    initial = initial_cls_filter(prepared, k)
    return ClsModel(steepest_descent(initial, problem, cfg.init_iters), scale)


def _fit_scale(
    samples: Sequence[ClsSample],
    high_res: bool,
    cfg: ClsFusionConfig,
    iters: int,
    start: Optional[LinearFilter] = None,
) -> ClsModel:
    maps = [s.features(high_res) for s in samples]
    problem = GramProblem.combine([s.problem(high_res) for s in samples], eta=cfg.eta)
    if start is None:
        start = initial_cls_filter([(f, s.center(f)) for f, s in zip(maps, samples)], cfg.kernel_size(high_res))
    return ClsModel(steepest_descent(start, problem, iters), maps[0].height)


def fit_cls_models(samples: Sequence[ClsSample], cfg: ClsFusionConfig) -> Tuple[ClsModel, ClsModel]:
    """Both scale models from cached per-sample supervision, starting at the pooled-patch initializer."""
    if not samples:
        raise ValueError("fit_cls_models needs at least one sample")
    return (
        _fit_scale(samples, False, cfg, cfg.init_iters),
        _fit_scale(samples, True, cfg, cfg.init_iters),
    )


def refresh_cls_models(
    models: Tuple[ClsModel, ClsModel],
    memory: ClsMemory[ClsSample],
    cfg: ClsFusionConfig,
) -> Tuple[ClsModel, ClsModel]:
    """``update_iters`` steps on first-frame plus memory supervision.

    With ``refresh_start="warm"`` descent continues from the current filters;
    with ``"initializer"`` it restarts from the pooled-patch initializer.
    """
    samples = [e.payload for e in memory.entries]
    if not samples:
        raise ValueError("cannot refresh from an empty memory")
    warm = cfg.refresh_start == "warm"
    m18, m72 = models
    return (
        _fit_scale(samples, False, cfg, cfg.update_iters, m18.filter if warm else None),
        _fit_scale(samples, True, cfg, cfg.update_iters, m72.filter if warm else None),
    )


def predict_scores(
    feat18: FeatureMap,
    feat72: FeatureMap,
    m18: ClsModel,
    m72: ClsModel,
    cfg: ClsFusionConfig,
) -> ScoreMap:
    """alpha * resize(score18) + beta * score72 on the high-resolution grid, from raw maps."""
    if feat18.height != m18.scale or feat72.height != m72.scale:
        raise ShapeError(
            f"feature grids {feat18.height}/{feat72.height} do not match model scales {m18.scale}/{m72.scale}"
        )
    low = correlate2d(prepare_features(feat18, cfg), m18.filter, PaddingMode.SAME_ZERO)
    high = correlate2d(prepare_features(feat72, cfg), m72.filter, PaddingMode.SAME_ZERO)
    resized = bilinear_resize(low, high.height, high.width)
    fused = cfg.alpha * resized.data[0] + cfg.beta * high.data[0]
    return ScoreMap(fused, stride=high.stride)


def locate_peak(score: ScoreMap) -> Tuple[Tuple[int, int], float]:
    """Argmax position; ties go to the smallest row-major index."""
    index = int(np.argmax(score.data))
    row, col = divmod(index, score.width)
    return (row, col), float(score.data[row, col])


def update_cls_memory(
    memory: ClsMemory[ClsSample],
    sample: ClsSample,
    peak: float,
    cfg: ClsFusionConfig,
) -> ClsMemory[ClsSample]:
    """Offer one frame; the best frame of each window is admitted."""
    if memory.window != cfg.update_interval or memory.capacity != cfg.memory_capacity:
        raise ValueError("memory was not built from this classification config")
    admitted = memory.offer(sample.frame_index, peak, sample)
    if admitted is not None:
        logger.debug(f"[Cls] Frame {admitted.frame_index} admitted to memory (peak {admitted.score:.3f})")
    return memory


def new_cls_memory(cfg: ClsFusionConfig) -> ClsMemory[ClsSample]:
    return ClsMemory(capacity=cfg.memory_capacity, window=cfg.update_interval)
