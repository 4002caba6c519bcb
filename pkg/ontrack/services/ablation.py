"""Ablation grids over seeded deforming synthetic sequences.

Every arm tracks the same sequences with one configuration change and is
summarized as an :class:`AblationRow`. The "traditional" arm replaces the
regression model generator with plain steepest descent from the static
model on the tracker's own predicted boxes; it is injected through the
tracker's online builder hook and is not a tracker mode.
"""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ontrack.core.optimizer import loss, steepest_descent
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import RmgConfig, SynthSpec, TrackerConfig
from ontrack.models.reports import AblationRow, AblationTable, EvalProtocol
from ontrack.services.backbone import FeatureExtractor, crop_search_region
from ontrack.services.dataset_io import to_float
from ontrack.services.evaluation import evaluate, vot_failures
from ontrack.services.rmg import (
    RegModel,
    RegSample,
    build_supervision,
    dynamic_generate,
    reg_filter_shape,
    rectify,
)
from ontrack.services.runner import RunResult, SequenceJob, run_many
from ontrack.services.synth import render_sequence
from ontrack.services.tracker import OnlineBuilder, init
from ontrack.utils.constants import ABLATION_SEEDS, ANTI_DRIFT_IOU, LAMBDA_SWEEP

logger = get_logger(__name__)


def deforming_specs(seeds: Sequence[int] = ABLATION_SEEDS, frames: int = 60) -> List[SynthSpec]:
    """Sequences with scale drift and aspect deformation, one per seed."""
    return [
        SynthSpec(
            frames=frames,
            translation_amplitude=2.0,
            scale_drift=0.004,
            aspect_rate=0.01,
            seed=seed,
            texture_seed=seed,
        )
        for seed in seeds
    ]


def make_traditional_online_model(
    online_samples: Sequence[RegSample],
    f_static: RegModel,
    cfg: RmgConfig,
    iters: int,
) -> RegModel:
    """Steepest descent from the static model on supervision from predicted boxes."""
    problem = build_supervision(online_samples, cfg.vicinity_radius, cfg.eta, cfg.kernel_size)
    return steepest_descent(f_static, problem, iters)


def trad_online_builder(
    online_samples: Sequence[RegSample],
    first_frame_samples: Sequence[RegSample],
    cfg: RmgConfig,
    supervision,
    static_model: RegModel,
) -> RegModel:
    return make_traditional_online_model(online_samples, static_model, cfg, cfg.rect_iters_update)


def _with_rmg(cfg: TrackerConfig, **update) -> TrackerConfig:
    return cfg.model_copy(update={"rmg": cfg.rmg.model_copy(update=update)})


def summarize(
    arm: str,
    runs: Sequence[Tuple[RunResult, List[BBox]]],
    parameter: Optional[float] = None,
) -> AblationRow:
    """Average per-sequence AO, AUC and failure counts into one row.

    Failures are counted on the no-reinitialization run with the VOT walk
    over its overlaps.
    """
    per_iou, aucs, failures = [], [], []
    for result, ground_truth in runs:
        report = evaluate(result.boxes, ground_truth, EvalProtocol.OTB)
        per_iou.append(report.ao)
        aucs.append(report.auc)
        failures.append(len(vot_failures(report.iou)[0]))
    return AblationRow(
        arm=arm,
        parameter=parameter,
        mean_iou=float(np.mean(per_iou)),
        auc=float(np.mean(aucs)),
        failures=float(np.mean(failures)),
        per_sequence_iou=per_iou,
    )


def run_arms(
    arms: Sequence[Tuple[str, TrackerConfig, Optional[OnlineBuilder], Optional[float]]],
    specs: Sequence[SynthSpec],
    workers: Optional[int] = None,
) -> List[AblationRow]:
    """Run every arm on every spec in one batch; rows keep the arm order."""
    jobs = [
        SequenceJob(cfg=cfg, spec=spec, online_builder=builder)
        for _, cfg, builder, _ in arms
        for spec in specs
    ]
    runs = run_many(jobs, workers)
    rows = []
    for i, (name, _, _, parameter) in enumerate(arms):
        row = summarize(name, runs[i * len(specs):(i + 1) * len(specs)], parameter)
        logger.info(f"[Ablate] {name}: mIoU {row.mean_iou:.4f}, AUC {row.auc:.4f}")
        rows.append(row)
    return rows


def run_online_ablation(
    cfg: TrackerConfig, specs: Sequence[SynthSpec], workers: Optional[int] = None
) -> AblationTable:
    """Initialization and online-update arms of the regression model."""
    arms = [
        ("init-filter", _with_rmg(cfg, rect_iters_init=0).model_copy(update={"online_regression": False}), None, None),
        ("init-rect", cfg.model_copy(update={"online_regression": False}), None, None),
        ("online-only", _with_rmg(cfg, lambda_reg=1.0, half_update=False), None, None),
        ("static+online", cfg.model_copy(update={"online_regression": True}), None, None),
    ]
    rows = run_arms(arms, specs, workers)
    static, online = rows[1].mean_iou, rows[3].mean_iou
    notes = [f"static-only mIoU {static:.4f}, with online regression {online:.4f}"]
    return AblationTable(title="Online regression ablation", rows=rows, notes=notes)


def run_trad_comparison(
    cfg: TrackerConfig, specs: Sequence[SynthSpec], workers: Optional[int] = None
) -> AblationTable:
    """No online update vs. traditional online descent vs. the rectified generator."""
    online = cfg.model_copy(update={"online_regression": True})
    arms = [
        ("no-online", cfg.model_copy(update={"online_regression": False}), None, None),
        ("trad", online, trad_online_builder, None),
        ("rmg", online, None, None),
    ]
    return AblationTable(title="Online update method", rows=run_arms(arms, specs, workers))


def run_half_update_toggle(
    cfg: TrackerConfig, specs: Sequence[SynthSpec], workers: Optional[int] = None
) -> AblationTable:
    online = cfg.model_copy(update={"online_regression": True})
    arms = [
        ("half-update", _with_rmg(online, half_update=True), None, None),
        ("full-update", _with_rmg(online, half_update=False), None, None),
    ]
    return AblationTable(title="Half weight update", rows=run_arms(arms, specs, workers))


def run_lambda_sweep(
    cfg: TrackerConfig,
    specs: Sequence[SynthSpec],
    lambdas: Sequence[float] = LAMBDA_SWEEP,
    workers: Optional[int] = None,
) -> AblationTable:
    """One row per fusion rate; lambda 0 reproduces the static-only run."""
    online = cfg.model_copy(update={"online_regression": True})
    arms = [(f"lambda={lam:.1f}", _with_rmg(online, lambda_reg=lam), None, lam) for lam in lambdas]
    return AblationTable(title="Fusion rate sweep", rows=run_arms(arms, specs, workers))


def corrupt_box(box: BBox, rng: np.random.Generator, target_iou: float = ANTI_DRIFT_IOU) -> BBox:
    """Shift ``box`` along one axis so that its IoU with the original is ``target_iou``."""
    factor = (1.0 - target_iou) / (1.0 + target_iou)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    if rng.random() < 0.5:
        return box.translate(sign * factor * box.width, 0.0)
    return box.translate(0.0, sign * factor * box.height)


def anti_drift_losses(cfg: TrackerConfig, spec: SynthSpec, samples: Optional[int] = None) -> Dict[str, float]:
    """First-frame supervision losses of online models built from corrupted boxes.

    Online samples are cropped around the previous ground-truth box and
    labelled with a box of IoU ``ANTI_DRIFT_IOU`` to the true one.
    """
    sequence = render_sequence(spec)
    frames, boxes = sequence.frames, sequence.boxes
    extractor = FeatureExtractor(cfg.backbone)
    state = init(to_float(frames[0]), boxes[0], cfg, extractor=extractor)
    rng = np.random.default_rng(spec.seed)

    count = min(samples or cfg.rmg.reg_memory_size, len(frames) - 1)
    online = []
    for k in range(1, count + 1):
        crop, transform = crop_search_region(to_float(frames[k]), boxes[k - 1], cfg.backbone)
        features = extractor.extract(crop)
        noisy = corrupt_box(boxes[k], rng)
        online.append(RegSample(features.reg72, transform.box_to_crop(noisy)))

    first = state.reg_memory.first_frame
    shape = reg_filter_shape(online[0].features.channels, cfg.rmg)
    dynamic = dynamic_generate(online, cfg.rmg, shape)
    rectified = rectify(dynamic, first, cfg.rmg, cfg.rmg.rect_iters_update, state.supervision)
    trad = make_traditional_online_model(online, state.static_model, cfg.rmg, cfg.rmg.rect_iters_update)
    return {
        "dynamic": loss(dynamic, state.supervision),
        "rectified": loss(rectified, state.supervision),
        "trad": loss(trad, state.supervision),
        "static": loss(state.static_model, state.supervision),
    }


def run_rectifier_anti_drift(cfg: TrackerConfig, specs: Sequence[SynthSpec]) -> AblationTable:
    """Per-seed first-frame losses: the rectified model must beat the raw dynamic one."""
    rows, below = [], 0
    for spec in specs:
        losses = anti_drift_losses(cfg, spec)
        below += losses["rectified"] < losses["dynamic"]
        rows.append(AblationRow(arm=f"seed {spec.seed}", metrics=losses))
        logger.info(f"[Ablate] Seed {spec.seed}: dynamic {losses['dynamic']:.6g}, rectified {losses['rectified']:.6g}")
    notes = [f"rectified below dynamic on {below}/{len(rows)} seeds"]
    if below < len(rows):
        logger.warning(f"[Ablate] Rectifier did not reduce the loss on {len(rows) - below} seeds")
    return AblationTable(title="Rectifier anti-drift", rows=rows, notes=notes)


TABLES = {
    "online": run_online_ablation,
    "trad": run_trad_comparison,
    "half": run_half_update_toggle,
    "lambda": run_lambda_sweep,
    "drift": run_rectifier_anti_drift,
}


def run_ablation(
    name: str,
    cfg: TrackerConfig,
    specs: Sequence[SynthSpec],
    workers: Optional[int] = None,
) -> AblationTable:
    """Run one named table."""
    if name not in TABLES:
        raise ValueError(f"unknown ablation '{name}', choose from {sorted(TABLES)}")
    logger.info(f"[Ablate] Running '{name}' on {len(specs)} sequences")
    if name == "drift":
        return run_rectifier_anti_drift(cfg, specs)
    return TABLES[name](cfg, specs, workers=workers)
