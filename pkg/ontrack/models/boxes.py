"""Axis-aligned bounding box model."""
import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, model_validator


class BBox(BaseModel):
    """Axis-aligned box in image pixel coordinates, corners (x0, y0) and (x1, y1)."""

    model_config = ConfigDict(frozen=True)

    x0: float
    y0: float
    x1: float
    y1: float

    @model_validator(mode="after")
    def _check_valid(self) -> "BBox":
        coords = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"box must have positive extent, got {coords}")
        return self

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        """Build from top-left corner and size."""
        return cls(x0=x, y0=y, x1=x + w, y1=y + h)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(x0=cx - w / 2.0, y0=cy - h / 2.0, x1=cx + w / 2.0, y1=cy + h / 2.0)

    def to_xywh(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.width, self.height)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(x0=self.x0 + dx, y0=self.y0 + dy, x1=self.x1 + dx, y1=self.y1 + dy)

    def intersects(self, height: float, width: float) -> bool:
        """True when the box overlaps the image area [0, width) x [0, height)."""
        return self.x1 > 0 and self.y1 > 0 and self.x0 < width and self.y0 < height

    def inside(self, height: float, width: float) -> bool:
        """True when the box lies fully within [0, width] x [0, height]."""
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 <= width and self.y1 <= height
