"""Pydantic configuration models for the tracker and the synthetic harness."""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BackboneConfig(BaseModel):
    """Fixed feature extractor settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    feature_channels: int = Field(default=16, ge=4, description="Channels C after the seeded mixing")
    seed: int = Field(default=0, description="Seed of the fixed channel-mixing projection")
    search_area_factor: float = Field(default=5.0, gt=0, description="Crop side relative to sqrt(w*h)")
    search_size: int = Field(default=288, ge=16, description="Crop side in pixels after resampling")
    separate_heads: bool = Field(
        default=False,
        description="Use per-branch seeded mixings for classification and regression features",
    )

    @model_validator(mode="after")
    def _check_search_size(self) -> "BackboneConfig":
        # stride-4 map, then a further 4x4 pool for the low-resolution map
        if self.search_size % 16 != 0:
            raise ValueError(f"search_size must be divisible by 16, got {self.search_size}")
        return self


class RmgConfig(BaseModel):
    """Regression model generator settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta: float = Field(default=0.1, gt=0, description="Regularization factor of the rectifier loss")
    lambda_reg: float = Field(default=0.6, ge=0.0, le=1.0, description="Online/static fusion rate")
    rect_iters_init: int = Field(default=6, ge=0, description="Rectifier iterations for the static model")
    rect_iters_update: int = Field(default=2, ge=0, description="Rectifier iterations for online models")
    update_interval: int = Field(default=20, ge=1, description="Rebuild the online model every n frames")
    half_update: bool = Field(default=True, description="Fuse only the first half of input channels")
    pool_samples_per_bin: int = Field(default=2, ge=1, description="ROI pooling samples per bin side")
    vicinity_radius: int = Field(default=2, ge=0, description="Supervision radius around the target center")
    kernel_size: int = Field(default=3, ge=1, description="Side of the regression kernel")
    reg_memory_size: int = Field(default=20, ge=1, description="Online regression samples kept")
    generator: Literal["broadcast", "seeded"] = Field(
        default="broadcast", description="Fixed map of the dynamic generator"
    )
    generator_seed: int = Field(default=0, description="Seed of the 'seeded' generator map")


class ClsFusionConfig(BaseModel):
    """Classification models, score fusion and memory settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(default=0.5, ge=0.0, description="Weight of the low-resolution score map")
    beta: float = Field(default=0.5, ge=0.0, description="Weight of the high-resolution score map")
    sigma: Optional[float] = Field(default=None, gt=0, description="Label sigma in grid cells; derived if unset")
    sigma_factor: float = Field(default=0.125, gt=0, description="Sigma relative to the target extent in cells")
    eta: float = Field(default=0.1, ge=0, description="Regularization factor of the classification loss")
    kernel_size_low: int = Field(default=3, ge=1, description="Kernel side on the low-resolution grid")
    kernel_size_high: int = Field(default=5, ge=1, description="Kernel side on the high-resolution grid")
    normalize_features: bool = Field(
        default=True, description="Standardize each feature channel over the search region"
    )
    init_iters: int = Field(default=6, ge=0, description="Steepest-descent iterations at initialization")
    update_iters: int = Field(default=2, ge=0, description="Steepest-descent iterations per refresh")
    refresh_start: Literal["warm", "initializer"] = Field(
        default="warm", description="Start refreshes from the current filters or from the pooled-patch initializer"
    )
    update_interval: int = Field(default=20, ge=1, description="Refresh classification models every n frames")
    memory_capacity: int = Field(default=50, ge=1, description="Maximum classification memory size")

    @model_validator(mode="after")
    def _check_weights(self) -> "ClsFusionConfig":
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha and beta must not both be zero")
        return self

    def kernel_size(self, high_res: bool) -> int:
        return self.kernel_size_high if high_res else self.kernel_size_low


class AugmentationConfig(BaseModel):
    """First-frame augmentation families; the defaults yield 23 samples."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    shift_fractions: List[float] = Field(
        default=[0.1, 0.2], description="Translations as fractions of the box side, applied along +-x and +-y"
    )
    rotation_degrees: List[float] = Field(
        default=[5.0, 10.0, 15.0, 20.0], description="Rotation magnitudes, applied with both signs"
    )
    blur_sigmas: List[float] = Field(
        default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0], description="Gaussian blur sigmas in pixels"
    )

    @property
    def total(self) -> int:
        return 1 + 4 * len(self.shift_fractions) + 2 * len(self.rotation_degrees) + len(self.blur_sigmas)


class TrackerConfig(BaseModel):
    """Complete tracker configuration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    rmg: RmgConfig = Field(default_factory=RmgConfig)
    classifier: ClsFusionConfig = Field(default_factory=ClsFusionConfig)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    confidence_threshold: float = Field(
        default=0.05, ge=0.0, description="Fraction of the first-frame score peak below which the position is held"
    )
    max_scale_change: float = Field(default=1.25, ge=1.0, description="Per-frame size change bound")
    min_box_size: float = Field(default=4.0, gt=0, description="Smallest emitted box side in pixels")
    online_regression: bool = Field(default=True, description="Build online regression models")
    seed: int = Field(default=0, description="Master seed propagated to seeded components")

    @model_validator(mode="after")
    def _check_memory(self) -> "TrackerConfig":
        # first-frame samples are pinned in the classification memory
        if self.classifier.memory_capacity < self.augmentation.total:
            raise ValueError(
                f"classifier.memory_capacity {self.classifier.memory_capacity} is below the "
                f"{self.augmentation.total} first-frame samples"
            )
        return self

    def with_seed(self, seed: int) -> "TrackerConfig":
        """Copy with the master seed propagated to the seeded components."""
        return self.model_copy(update={
            "seed": seed,
            "backbone": self.backbone.model_copy(update={"seed": seed}),
            "rmg": self.rmg.model_copy(update={"generator_seed": seed + 1}),
        })


class SynthSpec(BaseModel):
    """Synthetic sequence description."""

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "frames": 100,
                "translation_amplitude": 2.0,
                "scale_drift": 0.004,
                "aspect_rate": 0.01,
                "seed": 0,
            }
        },
    )

    frames: int = Field(default=100, ge=2)
    canvas_height: int = Field(default=256, ge=32)
    canvas_width: int = Field(default=256, ge=32)
    target_shape: Literal["rectangle", "ellipse"] = "rectangle"
    target_width: float = Field(default=40.0, gt=4)
    target_height: float = Field(default=32.0, gt=4)
    texture_seed: int = 0
    translation_amplitude: float = Field(default=2.0, ge=0, description="Random-walk step scale, px/frame")
    scale_drift: float = Field(default=0.0, gt=-0.5, lt=0.5, description="Per-frame scale growth rate r")
    aspect_rate: float = Field(default=0.0, ge=0, lt=0.5, description="Peak per-frame aspect log-change")
    distractors: int = Field(default=0, ge=0)
    distractor_similarity: float = Field(default=0.5, ge=0.0, le=1.0)
    occluders: int = Field(default=0, ge=0)
    occluder_duty: float = Field(default=0.2, ge=0.0, le=1.0)
    noise_sigma: float = Field(default=0.02, ge=0.0)
    seed: int = 0
