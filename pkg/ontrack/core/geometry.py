"""Image/grid bookkeeping, anchor-free regression targets and Gaussian labels.

Grid positions are ``(row, col)`` pairs; :func:`grid_to_image` keeps the
``(x, y)`` argument order of the mapping formula it implements.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ontrack.core.exceptions import GeometryError, ShapeError
from ontrack.models.boxes import BBox


@dataclass(frozen=True)
class ScoreMap:
    """H x W classification response."""

    data: np.ndarray
    stride: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"score map must be a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("score map contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class OffsetMaps:
    """Per-position distances (l, r, t, b) to the four box sides, in image pixels."""

    data: np.ndarray
    stride: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise ShapeError(f"offset maps must have shape (4, H, W), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("offset maps contain non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def at(self, position: Tuple[int, int]) -> np.ndarray:
        row, col = position
        return self.data[:, row, col].copy()


def grid_to_image(x: int, y: int, s: float) -> Tuple[int, int]:
    """Image pixel of grid cell (x, y): (floor(s/2 + x*s), floor(s/2 + y*s))."""
    return (math.floor(s / 2 + x * s), math.floor(s / 2 + y * s))


def center_to_grid(point: Tuple[float, float], s: float) -> Tuple[float, float]:
    """Real-valued (row, col) grid coordinate of an image point (px, py)."""
    px, py = point
    return ((py - s / 2) / s, (px - s / 2) / s)


def nearest_grid(point: Tuple[float, float], s: float, grid_h: int, grid_w: int) -> Tuple[int, int]:
    """Grid cell nearest to an image point; raises when it falls outside the grid."""
    gy, gx = center_to_grid(point, s)
    row, col = int(math.floor(gy + 0.5)), int(math.floor(gx + 0.5))
    if not (0 <= row < grid_h and 0 <= col < grid_w):
        raise GeometryError(f"point {point} maps to cell {(row, col)} outside {grid_h}x{grid_w} grid")
    return row, col


def encode_targets(box: BBox, grid_h: int, grid_w: int, s: float) -> OffsetMaps:
    """Regression targets at every grid position.

    With (px, py) the image pixel of a cell: l = px - x0, r = x1 - px,
    t = py - y0, b = y1 - py. Values are kept signed everywhere.
    """
    if not box.intersects(grid_h * s, grid_w * s):
        raise GeometryError(f"box {box} does not intersect the {grid_h}x{grid_w} grid extent")
    px = np.floor(s / 2 + np.arange(grid_w) * s)
    py = np.floor(s / 2 + np.arange(grid_h) * s)
    data = np.empty((4, grid_h, grid_w))
    data[0] = (px - box.x0)[None, :]
    data[1] = (box.x1 - px)[None, :]
    data[2] = (py - box.y0)[:, None]
    data[3] = (box.y1 - py)[:, None]
    return OffsetMaps(data, stride=s)


def decode_box(offsets: Sequence[float], position: Tuple[int, int], s: float) -> BBox:
    """Box from (l, r, t, b) predicted at grid ``position = (row, col)``."""
    l, r, t, b = (float(v) for v in offsets)
    if not (l + r > 0 and t + b > 0):
        raise GeometryError(f"offsets {(l, r, t, b)} decode to a degenerate box")
    row, col = position
    px, py = grid_to_image(col, row, s)
    return BBox(x0=px - l, y0=py - t, x1=px + r, y1=py + b)


def vicinity(center: Tuple[int, int], radius: int, grid_h: int, grid_w: int) -> List[Tuple[int, int]]:
    """Cells within Chebyshev distance ``radius`` of ``center``, clipped, row-major."""
    row, col = center
    if not (0 <= row < grid_h and 0 <= col < grid_w):
        raise GeometryError(f"center {center} outside {grid_h}x{grid_w} grid")
    return [
        (r, c)
        for r in range(max(0, row - radius), min(grid_h, row + radius + 1))
        for c in range(max(0, col - radius), min(grid_w, col + radius + 1))
    ]


def gaussian_label(
    center: Tuple[float, float],
    grid_h: int,
    grid_w: int,
    sigma: float,
    stride: float = 1.0,
) -> ScoreMap:
    """exp(-|p - center|^2 / (2 sigma^2)) over the grid; ``center = (row, col)``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    cy, cx = center
    dy = (np.arange(grid_h) - cy) ** 2
    dx = (np.arange(grid_w) - cx) ** 2
    return ScoreMap(np.exp(-(dy[:, None] + dx[None, :]) / (2.0 * sigma ** 2)), stride=stride)


def label_sigma(box: BBox, s: float, factor: float = 0.25) -> float:
    """Default label sigma: ``factor`` times the geometric mean target extent in cells."""
    return factor * math.sqrt(box.width * box.height) / s


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
