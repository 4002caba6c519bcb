"""Pydantic result models: evaluation reports, run metadata, events, tables."""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class EvalProtocol(str, Enum):
    """Evaluation protocol."""
    OTB = "otb"
    VOT = "vot"
    AO = "ao"


class TrackEventKind(str, Enum):
    """Side effects the tracker reports through its event callback."""
    ONLINE_REG_REBUILD = "online_reg_rebuild"
    CLS_REFRESH = "cls_refresh"
    LOW_CONFIDENCE = "low_confidence"
    REG_SAMPLE_ADMITTED = "reg_sample_admitted"
    CLS_SAMPLE_ADMITTED = "cls_sample_admitted"


class TrackEvent(BaseModel):
    """One tracker side effect."""
    frame_index: int
    kind: TrackEventKind
    detail: str = ""


class EvalReport(BaseModel):
    """Per-sequence evaluation report."""
    protocol: EvalProtocol
    frames: int = Field(ge=0)
    iou: List[float]
    center_error: List[float]
    success_curve: List[float] = Field(description="Success rate at thresholds 0:0.05:1")
    auc: float = Field(ge=0.0, le=1.0)
    precision_20: float = Field(ge=0.0, le=1.0)
    sr_50: float = Field(ge=0.0, le=1.0)
    sr_75: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0, description="Mean IoU over successfully tracked frames")
    failures: int = Field(ge=0)
    ao: float = Field(ge=0.0, le=1.0)
    fps: Optional[float] = None

    def summary(self) -> Dict[str, float]:
        """Scalar metrics only."""
        return {
            "frames": self.frames,
            "auc": self.auc,
            "precision_20": self.precision_20,
            "sr_50": self.sr_50,
            "sr_75": self.sr_75,
            "accuracy": self.accuracy,
            "failures": self.failures,
            "ao": self.ao,
            "fps": self.fps if self.fps is not None else float("nan"),
        }

    def to_text(self) -> str:
        lines = [f"protocol     {self.protocol.value}"]
        for key, value in self.summary().items():
            lines.append(f"{key:<12} {value:.4f}" if isinstance(value, float) else f"{key:<12} {value}")
        return "\n".join(lines)


class RunMeta(BaseModel):
    """Sidecar metadata written next to a results file."""
    config_hash: str
    seed: int
    fps: float
    frames: int
    protocol: EvalProtocol = EvalProtocol.OTB
    failures: int = 0
    version: str = "1.0.0"


def _cell(value: Optional[float], width: int, digits: int) -> str:
    return f"{'-':>{width}}" if value is None else f"{value:>{width}.{digits}f}"


class AblationRow(BaseModel):
    """One ablation arm averaged over sequences."""
    arm: str
    parameter: Optional[float] = None
    mean_iou: Optional[float] = None
    auc: Optional[float] = None
    failures: Optional[float] = None
    per_sequence_iou: List[float] = []
    metrics: Dict[str, float] = {}


class AblationTable(BaseModel):
    """A named set of ablation rows."""
    title: str
    rows: List[AblationRow]
    notes: List[str] = []

    def to_text(self) -> str:
        lines = [self.title, "-" * len(self.title)]
        lines.append(f"{'arm':<24} {'param':>7} {'mIoU':>8} {'AUC':>8} {'fail':>6}")
        for row in self.rows:
            cells = [_cell(row.parameter, 7, 2), _cell(row.mean_iou, 8, 4), _cell(row.auc, 8, 4), _cell(row.failures, 6, 2)]
            extra = "  ".join(f"{k}={v:.6g}" for k, v in row.metrics.items())
            lines.append(f"{row.arm:<24} " + " ".join(cells) + (f"  {extra}" if extra else ""))
        lines.extend(self.notes)
        return "\n".join(lines)


class CheckResult(BaseModel):
    """Outcome of one self-test suite."""
    name: str
    passed: bool
    detail: str = ""
    elapsed_s: float = 0.0


class StageTiming(BaseModel):
    """Accumulated wall time of one tracker stage."""
    stage: str
    calls: int = 0
    total_s: float = 0.0

    @property
    def mean_ms(self) -> float:
        return 1000.0 * self.total_s / self.calls if self.calls else 0.0


class BenchReport(BaseModel):
    """Per-stage timing of a tracking run."""
    frames: int
    fps: float
    stages: List[StageTiming]

    def to_text(self) -> str:
        lines = [f"frames {self.frames}  fps {self.fps:.2f}", f"{'stage':<14} {'calls':>6} {'total_s':>9} {'mean_ms':>9}"]
        for st in self.stages:
            lines.append(f"{st.stage:<14} {st.calls:>6} {st.total_s:>9.3f} {st.mean_ms:>9.2f}")
        return "\n".join(lines)
