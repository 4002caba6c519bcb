"""OTB-layout dataset I/O, results files and run metadata.

A dataset directory holds ``img/0001.ppm, 0002.ppm, ...`` (binary PPM) and
``groundtruth_rect.txt`` with one ``x,y,w,h`` line per frame in 0-based
pixel coordinates. Results files use the same box format.
"""
import json
import re
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import cv2
import numpy as np

from ontrack.core.exceptions import DatasetError
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.reports import RunMeta
from ontrack.utils.constants import FRAME_NAME, GROUNDTRUTH_FILE, IMG_DIR

logger = get_logger(__name__)

PathLike = Union[str, Path]

_SEPARATORS = re.compile(r"[,\s]+")


def to_uint8(frame: np.ndarray) -> np.ndarray:
    if frame.dtype == np.uint8:
        return frame
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_float(frame: np.ndarray) -> np.ndarray:
    """uint8 RGB frame as float64 in [0, 1]."""
    if frame.dtype == np.uint8:
        return frame.astype(np.float64) / 255.0
    return np.asarray(frame, dtype=np.float64)


def format_box(box: BBox) -> str:
    return ",".join(repr(float(v)) for v in box.to_xywh())


def write_boxes(path: PathLike, boxes: Sequence[BBox]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(format_box(b) + "\n" for b in boxes), encoding="utf-8")


def read_boxes(path: PathLike) -> List[BBox]:
    """Parse ``x,y,w,h`` lines (commas, tabs or spaces)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read boxes from {path}: {e}") from e
    boxes = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f for f in _SEPARATORS.split(line) if f]
        if len(fields) != 4:
            raise DatasetError(f"{path}:{number}: expected 4 values, got {len(fields)}")
        try:
            x, y, w, h = (float(f) for f in fields)
            boxes.append(BBox.from_xywh(x, y, w, h))
        except ValueError as e:
            raise DatasetError(f"{path}:{number}: invalid box '{line}'") from e
    return boxes


def frame_path(root: PathLike, index: int) -> Path:
    """Path of 0-based frame ``index``."""
    return Path(root) / IMG_DIR / FRAME_NAME.format(index + 1)


def write_frame(path: PathLike, frame: np.ndarray) -> None:
    if not cv2.imwrite(str(path), cv2.cvtColor(to_uint8(frame), cv2.COLOR_RGB2BGR)):
        raise DatasetError(f"failed to write frame {path}")


def read_frame(path: PathLike) -> np.ndarray:
    """uint8 RGB frame."""
    image = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if image is None:
        raise DatasetError(f"cannot read frame {path}")
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def write_sequence(root: PathLike, frames: Sequence[np.ndarray], boxes: Sequence[BBox]) -> None:
    """Write frames and ground truth in dataset layout."""
    if len(frames) != len(boxes):
        raise DatasetError(f"{len(frames)} frames but {len(boxes)} ground-truth boxes")
    root = Path(root)
    (root / IMG_DIR).mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(frames):
        write_frame(frame_path(root, index), frame)
    write_boxes(root / GROUNDTRUTH_FILE, boxes)
    logger.info(f"[Dataset] Wrote {len(frames)} frames to {root}")


def read_sequence(root: PathLike) -> Tuple[List[np.ndarray], List[BBox]]:
    """Frames (uint8 RGB) and ground truth; frame and box counts must agree."""
    root = Path(root)
    img_dir = root / IMG_DIR
    if not img_dir.is_dir():
        raise DatasetError(f"{root} has no {IMG_DIR}/ directory")
    boxes = read_boxes(root / GROUNDTRUTH_FILE)
    names = sorted(p.name for p in img_dir.iterdir() if p.suffix.lower() == ".ppm")
    expected = [FRAME_NAME.format(i + 1) for i in range(len(names))]
    if names != expected:
        raise DatasetError(f"frames in {img_dir} are not numbered consecutively from {expected[:1]}")
    if len(names) != len(boxes):
        raise DatasetError(f"{len(names)} frames but {len(boxes)} ground-truth boxes in {root}")
    frames = [read_frame(img_dir / name) for name in names]
    return frames, boxes


def write_meta(path: PathLike, meta: RunMeta) -> None:
    Path(path).write_text(json.dumps(meta.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_meta(path: PathLike) -> RunMeta:
    try:
        return RunMeta.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DatasetError(f"cannot read metadata {path}: {e}") from e
