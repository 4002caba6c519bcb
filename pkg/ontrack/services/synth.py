"""Synthetic single-target sequences with exact ground truth.

A blocky textured target moves over a smooth low-contrast background on a
seeded momentum random walk. Its size follows ``(1 + r)^k`` and its aspect
ratio oscillates without changing the area. Optional distractors reuse a
blend of the target texture; optional occluders pass over the target part
of the time. Frames are 8-bit RGB.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import cv2
import numpy as np

from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import SynthSpec
from ontrack.services.dataset_io import write_sequence

logger = get_logger(__name__)

TEXTURE_BLOCKS = 6
TEXTURE_SIZE = 48
MOMENTUM = 0.8
ASPECT_PERIOD = 50
OCCLUDER_PERIOD = 40
OCCLUDER_SCALE = 0.6


@dataclass(frozen=True)
class SyntheticSequence:
    frames: List[np.ndarray]
    boxes: List[BBox]


def make_texture(rng: np.random.Generator) -> np.ndarray:
    blocks = rng.uniform(0.05, 0.95, size=(TEXTURE_BLOCKS, TEXTURE_BLOCKS, 3)).astype(np.float32)
    return cv2.resize(blocks, (TEXTURE_SIZE, TEXTURE_SIZE), interpolation=cv2.INTER_NEAREST)


def make_background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    coarse = rng.uniform(0.4, 0.6, size=(5, 5, 3)).astype(np.float32)
    return cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC).clip(0.0, 1.0)


def paint(canvas: np.ndarray, box: BBox, texture: np.ndarray, ellipse: bool = False) -> None:
    """Draw ``texture`` stretched over the exact (sub-pixel) box, sampling at pixel centers."""
    height, width = canvas.shape[:2]
    x_lo, x_hi = max(int(np.floor(box.x0)), 0), min(int(np.ceil(box.x1)), width)
    y_lo, y_hi = max(int(np.floor(box.y0)), 0), min(int(np.ceil(box.y1)), height)
    if x_lo >= x_hi or y_lo >= y_hi:
        return
    u = (np.arange(x_lo, x_hi) + 0.5 - box.x0) / box.width
    v = (np.arange(y_lo, y_hi) + 0.5 - box.y0) / box.height
    inside = ((v >= 0) & (v < 1))[:, None] & ((u >= 0) & (u < 1))[None, :]
    if ellipse:
        inside &= (v[:, None] - 0.5) ** 2 + (u[None, :] - 0.5) ** 2 <= 0.25
    th, tw = texture.shape[:2]
    map_x = np.ascontiguousarray(np.broadcast_to(u * tw - 0.5, inside.shape), dtype=np.float32)
    map_y = np.ascontiguousarray(np.broadcast_to((v * th - 0.5)[:, None], inside.shape), dtype=np.float32)
    sampled = cv2.remap(texture, map_x, map_y, interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)
    region = canvas[y_lo:y_hi, x_lo:x_hi]
    region[inside] = sampled[inside]


class RandomWalk:
    """Momentum random walk of a box center that bounces off the canvas margins."""

    def __init__(self, rng: np.random.Generator, start: Tuple[float, float], amplitude: float, bounds: Tuple[float, float]):
        self.rng = rng
        self.position = np.array(start, dtype=np.float64)
        self.velocity = np.zeros(2)
        self.amplitude = amplitude
        self.bounds = np.array(bounds, dtype=np.float64)

    def step(self, half_size: Tuple[float, float]) -> Tuple[float, float]:
        noise = self.rng.standard_normal(2)
        if self.amplitude > 0:
            self.velocity = MOMENTUM * self.velocity + np.sqrt(1 - MOMENTUM ** 2) * self.amplitude * noise
            self.position = self.position + self.velocity
        low = np.asarray(half_size)
        high = self.bounds - low
        for axis in range(2):
            if low[axis] >= high[axis]:
                self.position[axis] = self.bounds[axis] / 2.0
            elif self.position[axis] < low[axis]:
                self.position[axis] = 2 * low[axis] - self.position[axis]
                self.velocity[axis] = abs(self.velocity[axis])
            elif self.position[axis] > high[axis]:
                self.position[axis] = 2 * high[axis] - self.position[axis]
                self.velocity[axis] = -abs(self.velocity[axis])
            self.position[axis] = float(np.clip(self.position[axis], min(low[axis], high[axis]), max(low[axis], high[axis])))
        return float(self.position[0]), float(self.position[1])


def target_size(spec: SynthSpec, k: int) -> Tuple[float, float]:
    """(w, h) at frame k: scale (1 + r)^k, area-preserving sinusoidal aspect change."""
    growth = (1.0 + spec.scale_drift) ** k
    amplitude = spec.aspect_rate * ASPECT_PERIOD / (2.0 * np.pi)
    log_aspect = amplitude * np.sin(2.0 * np.pi * k / ASPECT_PERIOD)
    stretch = np.exp(log_aspect / 2.0)
    return spec.target_width * growth * stretch, spec.target_height * growth / stretch


def render_sequence(spec: SynthSpec) -> SyntheticSequence:
    """Render all frames in memory (uint8 RGB) with their ground-truth boxes."""
    rng = np.random.default_rng(spec.seed)
    texture_rng = np.random.default_rng(spec.texture_seed)
    target_texture = make_texture(texture_rng)
    background = make_background(rng, spec.canvas_height, spec.canvas_width)
    ellipse = spec.target_shape == "ellipse"
    bounds = (float(spec.canvas_width), float(spec.canvas_height))

    walk = RandomWalk(rng, (bounds[0] / 2.0, bounds[1] / 2.0), spec.translation_amplitude, bounds)
    distractors = []
    for _ in range(spec.distractors):
        texture = (spec.distractor_similarity * target_texture
                   + (1.0 - spec.distractor_similarity) * make_texture(rng)).astype(np.float32)
        start = (rng.uniform(0.15, 0.85) * bounds[0], rng.uniform(0.15, 0.85) * bounds[1])
        distractors.append((texture, RandomWalk(rng, start, max(spec.translation_amplitude, 1.0), bounds)))
    occluders = []
    for _ in range(spec.occluders):
        color = rng.uniform(0.2, 0.8, size=3).astype(np.float32)
        phase = int(rng.integers(0, OCCLUDER_PERIOD))
        offset = rng.uniform(-0.3, 0.3, size=2)
        occluders.append((np.broadcast_to(color, (2, 2, 3)).copy(), phase, offset))

    frames, boxes = [], []
    for k in range(spec.frames):
        w, h = target_size(spec, k)
        cx, cy = walk.step((w / 2.0, h / 2.0))
        box = BBox.from_center(cx, cy, w, h)

        canvas = background.copy()
        for texture, d_walk in distractors:
            dx, dy = d_walk.step((w / 2.0, h / 2.0))
            paint(canvas, BBox.from_center(dx, dy, w, h), texture, ellipse)
        paint(canvas, box, target_texture, ellipse)
        for patch, phase, offset in occluders:
            visible = k > 0 and ((k + phase) % OCCLUDER_PERIOD) < spec.occluder_duty * OCCLUDER_PERIOD
            if visible:
                occ = BBox.from_center(cx + offset[0] * w, cy + offset[1] * h, OCCLUDER_SCALE * w, OCCLUDER_SCALE * h)
                paint(canvas, occ, patch)
        if spec.noise_sigma > 0:
            canvas = canvas + rng.normal(0.0, spec.noise_sigma, size=canvas.shape).astype(np.float32)
        frames.append(np.round(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8))
        boxes.append(box)

    logger.info(f"[Synth] Rendered {spec.frames} frames, seed {spec.seed}")
    return SyntheticSequence(frames=frames, boxes=boxes)


def synth_sequence(spec: SynthSpec, out_dir: Optional[str] = None) -> SyntheticSequence:
    """Render a sequence and, when ``out_dir`` is given, write it in dataset layout."""
    sequence = render_sequence(spec)
    if out_dir is not None:
        write_sequence(Path(out_dir), sequence.frames, sequence.boxes)
    return sequence
