"""Per-stage timing of a tracking run."""
from typing import Optional

from ontrack.logging_config import get_logger
from ontrack.models.configs import SynthSpec, TrackerConfig
from ontrack.models.reports import BenchReport
from ontrack.services.runner import track_sequence
from ontrack.services.synth import render_sequence
from ontrack.utils.helpers import StageTimer

logger = get_logger(__name__)


def run_bench(cfg: TrackerConfig, spec: Optional[SynthSpec] = None) -> BenchReport:
    """Track one synthetic sequence with a stage timer attached."""
    spec = spec or SynthSpec(frames=50)
    sequence = render_sequence(spec)
    timer = StageTimer()
    result = track_sequence(sequence.frames, sequence.boxes, cfg, timer=timer)
    report = BenchReport(frames=len(sequence.frames), fps=result.fps, stages=timer.report())
    logger.info(f"[Bench] {report.frames} frames at {report.fps:.2f} fps")
    return report
