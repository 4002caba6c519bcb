"""Dense multi-channel maps and the spatial operators built on them.

Everything here is a pure function over immutable values. "Convolution" is
cross-correlation (no kernel flip), the deep-learning convention.

Grid convention: cell ``x`` of a map with stride ``s`` is centered on image
pixel ``s/2 + x*s``. ROI pooling is the exception: it divides box
coordinates by the stride and reads the map at the resulting index, as
ROI-pooling layers do.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ontrack.core.exceptions import GeometryError, ShapeError
from ontrack.models.boxes import BBox


class PaddingMode(str, Enum):
    """Border handling of :func:`correlate2d`."""
    VALID = "valid"
    SAME_ZERO = "same-zero"


def _frozen_array(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0 or min(arr.shape) < 1:
        raise ShapeError(f"{what} must have positive extents, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """C x H x W grid of reals with an image-stride annotation."""

    data: np.ndarray
    stride: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, 3, "feature map"))
        if not (np.isfinite(self.stride) and self.stride > 0):
            raise ValueError(f"stride must be positive, got {self.stride}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class LinearFilter:
    """(C_out, C_in, k_h, k_w) correlation kernel."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights, 4, "filter"))

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_h(self) -> int:
        return self.weights.shape[2]

    @property
    def kernel_w(self) -> int:
        return self.weights.shape[3]

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.weights.shape

    @classmethod
    def zeros(cls, shape: Tuple[int, int, int, int]) -> "LinearFilter":
        return cls(np.zeros(shape))

    def matrix(self) -> np.ndarray:
        """Weights as a (C_in*k_h*k_w, C_out) matrix matching :func:`im2col` columns."""
        return self.weights.reshape(self.out_channels, -1).T


def same_padding(k: int) -> Tuple[int, int]:
    """(before, after) zero padding that keeps the extent for a kernel of side k."""
    before = (k - 1) // 2
    return before, k - 1 - before


def _windows(data: np.ndarray, kh: int, kw: int, mode: PaddingMode) -> np.ndarray:
    """Sliding windows of shape (C, H_out, W_out, kh, kw)."""
    if mode == PaddingMode.SAME_ZERO:
        pt, pb = same_padding(kh)
        pl, pr = same_padding(kw)
        data = np.pad(data, ((0, 0), (pt, pb), (pl, pr)))
    return sliding_window_view(data, (kh, kw), axis=(1, 2))


def correlate2d(
    input: FeatureMap,
    filter: LinearFilter,
    padding_mode: Union[PaddingMode, str] = PaddingMode.SAME_ZERO,
) -> FeatureMap:
    """Multi-channel cross-correlation.

    ``out[o, y, x] = sum_{c,i,j} in[c, y+i-pad_t, x+j-pad_l] * w[o, c, i, j]``
    with zeros outside the input. Same-zero padding uses
    ``pad_t = floor((k-1)/2)`` before and ``ceil((k-1)/2)`` after.
    """
    mode = PaddingMode(padding_mode)
    if filter.in_channels != input.channels:
        raise ShapeError(
            f"filter expects {filter.in_channels} input channels, map has {input.channels}"
        )
    if mode == PaddingMode.VALID and (filter.kernel_h > input.height or filter.kernel_w > input.width):
        raise ShapeError(
            f"kernel {filter.kernel_h}x{filter.kernel_w} larger than input "
            f"{input.height}x{input.width} in valid mode"
        )
    windows = _windows(input.data, filter.kernel_h, filter.kernel_w, mode)
    out = np.tensordot(windows, filter.weights, axes=([0, 3, 4], [1, 2, 3]))
    return FeatureMap(np.moveaxis(out, -1, 0), stride=input.stride)


def im2col(input: FeatureMap, kh: int, kw: Optional[int] = None) -> np.ndarray:
    """Same-zero patches at every position, shape (H*W, C*kh*kw).

    Rows are row-major positions; columns follow the (c, i, j) order of
    :meth:`LinearFilter.matrix`, so ``im2col(x, k) @ f.matrix()`` equals
    :func:`correlate2d` in same-zero mode.
    """
    kw = kh if kw is None else kw
    windows = _windows(input.data, kh, kw, PaddingMode.SAME_ZERO)
    cols = np.moveaxis(windows, 0, 2)  # (H, W, C, kh, kw)
    return np.ascontiguousarray(cols.reshape(input.height * input.width, -1))


def standardize_channels(input: FeatureMap, eps: float = 1e-5) -> FeatureMap:
    """Per-channel ``(x - mean) / (std + eps)`` over the spatial extent."""
    data = input.data
    mean = data.mean(axis=(1, 2), keepdims=True)
    std = data.std(axis=(1, 2), keepdims=True)
    return FeatureMap((data - mean) / (std + eps), stride=input.stride)


def bilinear_resize(input: FeatureMap, new_h: int, new_w: int) -> FeatureMap:
    """Align-corners bilinear resampling; a single output row/column samples the center."""
    if new_h < 1 or new_w < 1:
        raise ShapeError(f"target size must be positive, got {new_h}x{new_w}")
    _, h, w = input.shape
    if (new_h, new_w) == (h, w):
        return input

    def axis_coords(n_in: int, n_out: int):
        if n_out > 1:
            src = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
        else:
            src = np.full(1, (n_in - 1) / 2.0)
        lo = np.clip(np.floor(src).astype(np.int64), 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, wy = axis_coords(h, new_h)
    x0, x1, wx = axis_coords(w, new_w)
    data = input.data
    rows = data[:, y0, :] * (1.0 - wy)[None, :, None] + data[:, y1, :] * wy[None, :, None]
    out = rows[:, :, x0] * (1.0 - wx)[None, None, :] + rows[:, :, x1] * wx[None, None, :]
    return FeatureMap(out, stride=input.stride * w / new_w)


def bilinear_sample(data: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample (C, H, W) data at real grid coordinates with border clamping.

    ``ys``/``xs`` broadcast together; the result has shape (C, *broadcast shape).
    """
    _, h, w = data.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = ys - y0
    wx = xs - x0
    top = data[:, y0, x0] * (1.0 - wx) + data[:, y0, x1] * wx
    bottom = data[:, y1, x0] * (1.0 - wx) + data[:, y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def prroi_pool(
    input: FeatureMap,
    box: BBox,
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
) -> FeatureMap:
    """Approximate precise ROI pooling by fixed-grid bilinear sampling.

    Box coordinates divided by the stride are map indices: the box
    ``[x0, x1)`` covers map columns ``x0/s`` to ``x1/s``. Every output bin is
    the mean of ``samples_per_bin**2`` bilinear samples at uniformly spaced
    interior points of the bin, which is exact for maps that are affine
    within the bin and converges to the bin integral as the sample count grows.
    """
    if out_h < 1 or out_w < 1 or samples_per_bin < 1:
        raise ShapeError("output size and samples_per_bin must be positive")
    if box.area <= 0:
        raise GeometryError(f"degenerate ROI {box}")
    s = input.stride
    if not box.intersects(input.height * s, input.width * s):
        raise GeometryError(f"ROI {box} does not overlap the map extent")

    gy0 = box.y0 / s
    gx0 = box.x0 / s
    bin_h = box.height / s / out_h
    bin_w = box.width / s / out_w
    offsets = (np.arange(samples_per_bin, dtype=np.float64) + 0.5) / samples_per_bin
    ys = gy0 + (np.arange(out_h)[:, None] + offsets[None, :]) * bin_h  # (out_h, n)
    xs = gx0 + (np.arange(out_w)[:, None] + offsets[None, :]) * bin_w  # (out_w, n)
    samples = bilinear_sample(
        input.data,
        ys[:, :, None, None],
        xs[None, None, :, :],
    )  # (C, out_h, n, out_w, n)
    pooled = samples.mean(axis=(2, 4))
    return FeatureMap(pooled, stride=box.width / out_w)


def extract_patch(input: FeatureMap, center: Tuple[int, int], k: int) -> np.ndarray:
    """k x k window around ``center = (row, col)``, zero outside the map.

    ``patch[c, i, j] = input[c, cy + i - k//2, cx + j - k//2]``.
    """
    cy, cx = int(center[0]), int(center[1])
    if not (0 <= cy < input.height and 0 <= cx < input.width):
        raise GeometryError(f"center {center} outside {input.height}x{input.width} map")
    top, left = cy - k // 2, cx - k // 2
    y_lo, y_hi = max(top, 0), min(top + k, input.height)
    x_lo, x_hi = max(left, 0), min(left + k, input.width)
    patch = np.zeros((input.channels, k, k))
    patch[:, y_lo - top:y_hi - top, x_lo - left:x_hi - left] = input.data[:, y_lo:y_hi, x_lo:x_hi]
    return patch
