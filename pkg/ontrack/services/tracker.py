"""Online tracking loop.

``init`` builds the static regression model and the two classification
models from the augmented first frame. ``track_frame`` then classifies,
regresses and decodes one box per frame, feeds the sample memories and
rebuilds models on their schedules: the online regression model at frame
indices divisible by ``rmg.update_interval``, the classification models at
indices divisible by ``classifier.update_interval``. The first frame has
index 0.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ontrack.core.exceptions import GeometryError, TrackerStateError
from ontrack.core.geometry import decode_box, grid_to_image
from ontrack.core.optimizer import LsqProblem
from ontrack.core.sample_memory import ClsMemory, RegSampleMemory
from ontrack.core.tensor_ops import PaddingMode, correlate2d
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import RmgConfig, TrackerConfig
from ontrack.models.reports import TrackEvent, TrackEventKind
from ontrack.services.augmentation import augment_first_frame
from ontrack.services.backbone import BranchFeatures, FeatureExtractor, as_image, crop_search_region
from ontrack.services.classification import (
    ClsModel,
    ClsSample,
    fit_cls_models,
    locate_peak,
    new_cls_memory,
    predict_scores,
    refresh_cls_models,
    update_cls_memory,
)
from ontrack.services.rmg import (
    RegModel,
    RegSample,
    first_frame_supervision,
    fuse,
    make_online_model,
    make_static_model,
)
from ontrack.utils.helpers import StageTimer, maybe_stage

logger = get_logger(__name__)

# Floor of the first-frame peak used as the confidence reference
PEAK_FLOOR = 1e-6

EventCallback = Callable[[TrackEvent], None]
OnlineBuilder = Callable[
    [Sequence[RegSample], Sequence[RegSample], RmgConfig, LsqProblem, RegModel],
    RegModel,
]


def rmg_online_builder(
    online_samples: Sequence[RegSample],
    first_frame_samples: Sequence[RegSample],
    cfg: RmgConfig,
    supervision: LsqProblem,
    static_model: RegModel,
) -> RegModel:
    """Default online builder: dynamic generation rectified on first-frame ground truth."""
    return make_online_model(online_samples, first_frame_samples, cfg, supervision)


@dataclass
class TrackState:
    """Mutable single-writer state of one tracked sequence."""

    cfg: TrackerConfig
    extractor: FeatureExtractor
    box: BBox
    frame_size: Tuple[int, int]
    frame_index: int
    static_model: RegModel
    current_model: RegModel
    cls_models: Tuple[ClsModel, ClsModel]
    cls_memory: ClsMemory[ClsSample]
    reg_memory: RegSampleMemory[RegSample]
    supervision: LsqProblem
    seed: int
    reference_peak: float = 1.0
    online_model: Optional[RegModel] = None
    confidence: float = 1.0
    on_event: Optional[EventCallback] = None
    online_builder: OnlineBuilder = rmg_online_builder
    timer: Optional[StageTimer] = None

    def emit(self, kind: TrackEventKind, detail: str = "") -> None:
        if self.on_event is not None:
            self.on_event(TrackEvent(frame_index=self.frame_index, kind=kind, detail=detail))


def init(
    frame: np.ndarray,
    box: BBox,
    cfg: TrackerConfig,
    extractor: Optional[FeatureExtractor] = None,
    on_event: Optional[EventCallback] = None,
    online_builder: Optional[OnlineBuilder] = None,
    timer: Optional[StageTimer] = None,
) -> TrackState:
    """Build the first-frame models.

    Args:
        frame: First frame, (H, W, 3) in [0, 1].
        box: Ground-truth target box on that frame.
        cfg: Tracker configuration.
        extractor: Feature extractor to reuse; built from ``cfg.backbone`` if omitted.
        on_event: Receives a :class:`TrackEvent` for every model/memory side effect.
        online_builder: Replaces the online regression model construction.
        timer: Accumulates per-stage wall time.

    Returns:
        TrackState: state with frame_index 0.
    """
    frame = as_image(frame)
    extractor = extractor or FeatureExtractor(cfg.backbone)
    reg_samples, cls_samples = [], []
    first_features: Optional[BranchFeatures] = None
    for image, sample_box in augment_first_frame(frame, box, cfg.augmentation):
        with maybe_stage(timer, "crop"):
            crop, transform = crop_search_region(image, sample_box, cfg.backbone)
        with maybe_stage(timer, "features"):
            features = extractor.extract(crop)
        first_features = first_features or features
        crop_box = transform.box_to_crop(sample_box)
        reg_samples.append(RegSample(features.reg72, crop_box, is_first_frame=True))
        cls_samples.append(ClsSample(0, features.cls18, features.cls72, crop_box, cfg.classifier))

    with maybe_stage(timer, "init_models"):
        supervision = first_frame_supervision(reg_samples, cfg.rmg)
        static_model = make_static_model(reg_samples, cfg.rmg, supervision)
        cls_models = fit_cls_models(cls_samples, cfg.classifier)
        reference_peak = first_frame_peak(first_features, cls_models, cfg)

    cls_memory = new_cls_memory(cfg.classifier)
    cls_memory.pin(cls_samples)
    reg_memory: RegSampleMemory[RegSample] = RegSampleMemory(cfg.rmg.reg_memory_size)
    reg_memory.seed(reg_samples)

    logger.info(
        f"[Tracker] Initialized on {box.to_xywh()} with {len(reg_samples)} first-frame samples, "
        f"reference peak {reference_peak:.4f}"
    )
    return TrackState(
        cfg=cfg,
        extractor=extractor,
        box=box,
        frame_size=frame.shape[:2],
        frame_index=0,
        static_model=static_model,
        current_model=static_model,
        cls_models=cls_models,
        cls_memory=cls_memory,
        reg_memory=reg_memory,
        supervision=supervision,
        seed=cfg.seed,
        reference_peak=reference_peak,
        on_event=on_event,
        online_builder=online_builder or rmg_online_builder,
        timer=timer,
    )


def first_frame_peak(features: BranchFeatures, cls_models: Tuple[ClsModel, ClsModel], cfg: TrackerConfig) -> float:
    """Fused score peak on the unaugmented first frame; confidences are relative to it."""
    m18, m72 = cls_models
    _, peak = locate_peak(predict_scores(features.cls18, features.cls72, m18, m72, cfg.classifier))
    if peak <= PEAK_FLOOR:
        logger.warning(f"[Tracker] First-frame peak {peak:.3g} is below the floor, using {PEAK_FLOOR}")
        return PEAK_FLOOR
    return peak


def constrain_box(box: BBox, previous: BBox, cfg: TrackerConfig, frame_size: Tuple[int, int]) -> BBox:
    """Bound the per-frame size change and keep the center inside the frame."""
    m = cfg.max_scale_change
    width = max(float(np.clip(box.width, previous.width / m, previous.width * m)), cfg.min_box_size)
    height = max(float(np.clip(box.height, previous.height / m, previous.height * m)), cfg.min_box_size)
    frame_h, frame_w = frame_size
    cx, cy = box.center
    cx = float(np.clip(cx, 0.0, frame_w))
    cy = float(np.clip(cy, 0.0, frame_h))
    return BBox.from_center(cx, cy, width, height)


def track_frame(state: Optional[TrackState], frame: np.ndarray) -> Tuple[BBox, float]:
    """Track one frame.

    Returns the emitted box and its confidence: the fused score peak as a
    fraction of the first-frame peak. Below ``confidence_threshold`` the
    previous box is held and no memory is fed.
    """
    if state is None:
        raise TrackerStateError("track_frame called on an uninitialized tracker")
    frame = as_image(frame)
    cfg = state.cfg
    timer = state.timer
    state.frame_index += 1
    index = state.frame_index

    with maybe_stage(timer, "crop"):
        crop, transform = crop_search_region(frame, state.box, cfg.backbone)
    with maybe_stage(timer, "features"):
        features = state.extractor.extract(crop)
    with maybe_stage(timer, "scores"):
        m18, m72 = state.cls_models
        score = predict_scores(features.cls18, features.cls72, m18, m72, cfg.classifier)
        (row, col), peak = locate_peak(score)
        confidence = peak / state.reference_peak

    with maybe_stage(timer, "regression"):
        offsets = correlate2d(features.reg72, state.current_model, PaddingMode.SAME_ZERO)
        stride = features.reg72.stride
        try:
            box = transform.box_to_image(decode_box(offsets.data[:, row, col], (row, col), stride))
        except GeometryError:
            px, py = grid_to_image(col, row, stride)
            cx, cy = transform.point_to_image(px, py)
            box = BBox.from_center(cx, cy, state.box.width, state.box.height)
            logger.debug(f"[Tracker] Frame {index}: degenerate regression, keeping size")
        box = constrain_box(box, state.box, cfg, state.frame_size)

    if confidence < cfg.confidence_threshold:
        box = state.box
        state.emit(TrackEventKind.LOW_CONFIDENCE, f"confidence {confidence:.4f}")
        logger.warning(f"[Tracker] Frame {index}: low confidence {confidence:.4f}, holding position")
    else:
        with maybe_stage(timer, "update"):
            crop_box = transform.box_to_crop(box)
            state.reg_memory.add(index, confidence, RegSample(features.reg72, crop_box))
            state.emit(TrackEventKind.REG_SAMPLE_ADMITTED)
            admitted_before = state.cls_memory.admitted
            sample = ClsSample(index, features.cls18, features.cls72, crop_box, cfg.classifier)
            update_cls_memory(state.cls_memory, sample, confidence, cfg.classifier)
            if state.cls_memory.admitted > admitted_before:
                state.emit(TrackEventKind.CLS_SAMPLE_ADMITTED)

    state.box = box
    state.confidence = confidence

    with maybe_stage(timer, "update"):
        if cfg.online_regression and index % cfg.rmg.update_interval == 0 and len(state.reg_memory):
            online = state.online_builder(
                state.reg_memory.online(),
                state.reg_memory.first_frame,
                cfg.rmg,
                state.supervision,
                state.static_model,
            )
            state.online_model = online
            state.current_model = fuse(online, state.static_model, cfg.rmg)
            state.emit(TrackEventKind.ONLINE_REG_REBUILD, f"{len(state.reg_memory)} samples")
            logger.info(f"[Tracker] Frame {index}: online regression model rebuilt")
        if index % cfg.classifier.update_interval == 0:
            state.cls_models = refresh_cls_models(state.cls_models, state.cls_memory, cfg.classifier)
            state.emit(TrackEventKind.CLS_REFRESH, f"{len(state.cls_memory)} samples")
            logger.info(f"[Tracker] Frame {index}: classification models refreshed")

    logger.debug(f"[Tracker] Frame {index}: box {box.to_xywh()} confidence {confidence:.4f}")
    return box, confidence


class Tracker:
    """Reusable single-target tracker around :func:`init` and :func:`track_frame`."""

    def __init__(
        self,
        cfg: TrackerConfig,
        on_event: Optional[EventCallback] = None,
        online_builder: Optional[OnlineBuilder] = None,
        timer: Optional[StageTimer] = None,
    ):
        self.cfg = cfg
        self.extractor = FeatureExtractor(cfg.backbone)
        self.on_event = on_event
        self.online_builder = online_builder
        self.timer = timer
        self._state: Optional[TrackState] = None

    @property
    def state(self) -> Optional[TrackState]:
        return self._state

    def init(self, frame: np.ndarray, box: BBox) -> None:
        self._state = init(
            frame,
            box,
            self.cfg,
            extractor=self.extractor,
            on_event=self.on_event,
            online_builder=self.online_builder,
            timer=self.timer,
        )

    def track(self, frame: np.ndarray) -> Tuple[BBox, float]:
        if self._state is None:
            raise TrackerStateError("Tracker.track called before init")
        return track_frame(self._state, frame)
