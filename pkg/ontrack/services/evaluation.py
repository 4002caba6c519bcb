"""Tracking metrics: OTB success/precision, VOT accuracy/robustness and AO."""
from typing import List, Optional, Sequence, Set, Union

import numpy as np

from ontrack.core.exceptions import DatasetError
from ontrack.core.geometry import iou
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.reports import EvalProtocol, EvalReport
from ontrack.utils.constants import PRECISION_THRESHOLD_PX, SUCCESS_THRESHOLDS, VOT_BURN_IN, VOT_REINIT_DELAY

logger = get_logger(__name__)

__all__ = ["center_error", "evaluate", "iou", "success_curve", "vot_failures"]


def center_error(a: BBox, b: BBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return float(np.hypot(ax - bx, ay - by))


def success_curve(overlaps: Sequence[float]) -> List[float]:
    """Fraction of frames with IoU >= t for each threshold t; frames without overlap never count."""
    values = np.asarray(overlaps, dtype=np.float64)
    if values.size == 0:
        return [0.0 for _ in SUCCESS_THRESHOLDS]
    hit = values > 0
    return [float(np.mean(hit & (values >= t))) for t in SUCCESS_THRESHOLDS]


def vot_failures(overlaps: Sequence[float]):
    """Walk the reinitialization protocol.

    A frame with zero overlap is a failure; the following frames up to the
    reinitialization ``VOT_REINIT_DELAY`` frames later are skipped, and the
    reinitialization frame plus ``VOT_BURN_IN - 1`` more are excluded from
    accuracy.

    Returns:
        tuple: (failure frame indices, set of frame indices excluded from accuracy)
    """
    failures: List[int] = []
    excluded: Set[int] = set()
    n = len(overlaps)
    t = 0
    while t < n:
        if overlaps[t] == 0.0:
            failures.append(t)
            reinit = t + VOT_REINIT_DELAY
            excluded.update(range(t, min(reinit + VOT_BURN_IN, n)))
            t = reinit + 1
        else:
            t += 1
    return failures, excluded


def evaluate(
    predictions: Sequence[BBox],
    ground_truth: Sequence[BBox],
    protocol: Union[EvalProtocol, str] = EvalProtocol.OTB,
    fps: Optional[float] = None,
) -> EvalReport:
    """Per-sequence report; every metric is filled, ``protocol`` selects the failure handling.

    For ``vot`` accuracy averages IoU outside failure, skip and burn-in
    frames; for ``otb`` and ``ao`` it averages over frames with overlap and
    no failures are counted.
    """
    protocol = EvalProtocol(protocol)
    if len(predictions) != len(ground_truth):
        raise DatasetError(f"{len(predictions)} predictions but {len(ground_truth)} ground-truth boxes")
    overlaps = [iou(p, g) for p, g in zip(predictions, ground_truth)]
    errors = [center_error(p, g) for p, g in zip(predictions, ground_truth)]
    curve = success_curve(overlaps)
    values = np.asarray(overlaps, dtype=np.float64)
    n = len(overlaps)

    if protocol == EvalProtocol.VOT:
        failures, excluded = vot_failures(overlaps)
        tracked = [o for i, o in enumerate(overlaps) if i not in excluded]
    else:
        failures = []
        tracked = [o for o in overlaps if o > 0]

    report = EvalReport(
        protocol=protocol,
        frames=n,
        iou=overlaps,
        center_error=errors,
        success_curve=curve,
        auc=float(np.mean(curve)) if n else 0.0,
        precision_20=float(np.mean(np.asarray(errors) <= PRECISION_THRESHOLD_PX)) if n else 0.0,
        sr_50=float(np.mean(values >= 0.5)) if n else 0.0,
        sr_75=float(np.mean(values >= 0.75)) if n else 0.0,
        accuracy=float(np.mean(tracked)) if tracked else 0.0,
        failures=len(failures),
        ao=float(np.mean(values)) if n else 0.0,
        fps=fps,
    )
    logger.debug(f"[Eval] {protocol.value}: AO {report.ao:.4f}, AUC {report.auc:.4f}, failures {report.failures}")
    return report
