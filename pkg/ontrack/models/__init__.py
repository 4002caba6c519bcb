"""Data models module."""
from ontrack.models.boxes import BBox
from ontrack.models.configs import (
    AugmentationConfig,
    BackboneConfig,
    ClsFusionConfig,
    RmgConfig,
    SynthSpec,
    TrackerConfig,
)
from ontrack.models.reports import (
    AblationRow,
    AblationTable,
    BenchReport,
    CheckResult,
    EvalProtocol,
    EvalReport,
    RunMeta,
    StageTiming,
    TrackEvent,
    TrackEventKind,
)

__all__ = [
    "AblationRow",
    "AblationTable",
    "AugmentationConfig",
    "BackboneConfig",
    "BBox",
    "BenchReport",
    "CheckResult",
    "ClsFusionConfig",
    "EvalProtocol",
    "EvalReport",
    "RmgConfig",
    "RunMeta",
    "StageTiming",
    "SynthSpec",
    "TrackerConfig",
    "TrackEvent",
    "TrackEventKind",
]
