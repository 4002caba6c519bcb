"""Sequence runs: single sequences, dataset directories and parallel batches."""
import asyncio
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ontrack.config import get_settings
from ontrack.core.exceptions import DatasetError
from ontrack.core.geometry import iou
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import SynthSpec, TrackerConfig
from ontrack.models.reports import EvalProtocol, RunMeta, TrackEvent
from ontrack.services.dataset_io import read_sequence, to_float, write_boxes, write_meta
from ontrack.services.synth import render_sequence
from ontrack.services.tracker import OnlineBuilder, Tracker
from ontrack.utils.constants import META_FILE, VOT_REINIT_DELAY
from ontrack.utils.helpers import StageTimer, config_hash

logger = get_logger(__name__)


@dataclass
class RunResult:
    """Boxes emitted for every frame of one sequence."""

    boxes: List[BBox]
    confidences: List[float]
    failures: int
    fps: float
    events: List[TrackEvent] = field(default_factory=list)


def track_sequence(
    frames: Sequence[np.ndarray],
    ground_truth: Sequence[BBox],
    cfg: TrackerConfig,
    protocol: Union[EvalProtocol, str] = EvalProtocol.OTB,
    online_builder: Optional[OnlineBuilder] = None,
    timer: Optional[StageTimer] = None,
    record_events: bool = False,
) -> RunResult:
    """Track a whole sequence from the first ground-truth box.

    With the ``vot`` protocol a prediction without overlap is a failure and
    the tracker is reinitialized from ground truth ``VOT_REINIT_DELAY``
    frames later; frames in between repeat the failed box.
    """
    protocol = EvalProtocol(protocol)
    if not frames:
        raise DatasetError("empty sequence")
    if len(frames) != len(ground_truth):
        raise DatasetError(f"{len(frames)} frames but {len(ground_truth)} ground-truth boxes")

    events: List[TrackEvent] = []
    tracker = Tracker(
        cfg,
        on_event=events.append if record_events else None,
        online_builder=online_builder,
        timer=timer,
    )
    n = len(frames)
    start = time.perf_counter()
    tracker.init(to_float(frames[0]), ground_truth[0])
    boxes: List[BBox] = [ground_truth[0]]
    confidences: List[float] = [1.0]
    failures = 0

    t = 1
    while t < n:
        box, confidence = tracker.track(to_float(frames[t]))
        boxes.append(box)
        confidences.append(confidence)
        if protocol == EvalProtocol.VOT and iou(box, ground_truth[t]) == 0.0:
            failures += 1
            reinit = t + VOT_REINIT_DELAY
            logger.info(f"[Runner] Failure at frame {t}, reinitializing at {reinit}")
            for _ in range(t + 1, min(reinit, n)):
                boxes.append(box)
                confidences.append(0.0)
            if reinit < n:
                tracker.init(to_float(frames[reinit]), ground_truth[reinit])
                boxes.append(ground_truth[reinit])
                confidences.append(1.0)
            t = reinit + 1
        else:
            t += 1

    elapsed = time.perf_counter() - start
    fps = n / elapsed if elapsed > 0 else float("inf")
    logger.info(f"[Runner] Tracked {n} frames at {fps:.1f} fps, {failures} failures")
    return RunResult(boxes=boxes, confidences=confidences, failures=failures, fps=fps, events=events)


def run_dataset(
    dataset_dir: Union[str, Path],
    cfg: TrackerConfig,
    results_path: Union[str, Path],
    protocol: Union[EvalProtocol, str] = EvalProtocol.OTB,
) -> Tuple[RunResult, RunMeta]:
    """Track a dataset directory; writes the results file and ``meta.json`` beside it."""
    frames, ground_truth = read_sequence(dataset_dir)
    result = track_sequence(frames, ground_truth, cfg, protocol)
    results_path = Path(results_path)
    write_boxes(results_path, result.boxes)
    meta = RunMeta(
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        fps=result.fps,
        frames=len(frames),
        protocol=EvalProtocol(protocol),
        failures=result.failures,
        version=get_settings().APP_VERSION,
    )
    write_meta(results_path.parent / META_FILE, meta)
    return result, meta


@dataclass(frozen=True)
class SequenceJob:
    """One sequence to run in a worker: a synthetic spec or a dataset directory."""

    cfg: TrackerConfig
    spec: Optional[SynthSpec] = None
    dataset_dir: Optional[str] = None
    protocol: EvalProtocol = EvalProtocol.OTB
    online_builder: Optional[OnlineBuilder] = None

    def load(self) -> Tuple[List[np.ndarray], List[BBox]]:
        if self.spec is not None:
            sequence = render_sequence(self.spec)
            return sequence.frames, sequence.boxes
        if self.dataset_dir is not None:
            return read_sequence(self.dataset_dir)
        raise DatasetError("job has neither a synthetic spec nor a dataset directory")


def run_job(job: SequenceJob) -> Tuple[RunResult, List[BBox]]:
    frames, ground_truth = job.load()
    result = track_sequence(frames, ground_truth, job.cfg, job.protocol, online_builder=job.online_builder)
    return result, ground_truth


async def _run_parallel(jobs: Sequence[SequenceJob], workers: int) -> List[Tuple[RunResult, List[BBox]]]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        tasks = [loop.run_in_executor(pool, run_job, job) for job in jobs]
        return list(await asyncio.gather(*tasks))


def run_many(jobs: Sequence[SequenceJob], workers: Optional[int] = None) -> List[Tuple[RunResult, List[BBox]]]:
    """Run jobs across ``workers`` processes (``Settings.WORKERS`` by default); results keep input order."""
    workers = workers or get_settings().WORKERS
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(job) for job in jobs]
    logger.info(f"[Runner] Running {len(jobs)} sequences on {workers} workers")
    return asyncio.run(_run_parallel(jobs, workers))
