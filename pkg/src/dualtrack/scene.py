"""Geometric and video data types shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

SCALES = (0.95, 1.0, 1.05)

# D65 reference white, sRGB primaries
_WHITE = np.array([0.95047, 1.0, 1.08883])
_RGB2XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB values (..., 3) to CIELAB under D65."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = lin @ _RGB2XYZ.T / _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Frame:
    """One RGB image with its cached CIELAB conversion."""

    __slots__ = ("rgb", "lab", "index")

    def __init__(self, rgb: np.ndarray, index: int = 0, lab: Optional[np.ndarray] = None):
        rgb = np.asarray(rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) rgb array, got shape {rgb.shape}")
        rgb = _frozen(rgb.astype(np.uint8, copy=True))
        if lab is None:
            lab = rgb_to_lab(rgb)
        elif lab.shape != rgb.shape:
            raise ValueError("lab cache does not match rgb dimensions")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "lab", _frozen(np.asarray(lab, dtype=np.float64)))
        object.__setattr__(self, "index", int(index))

    def __setattr__(self, name, value):
        raise AttributeError("Frame is immutable")

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    def __repr__(self) -> str:
        return f"Frame(index={self.index}, {self.width}x{self.height})"


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float
    frame: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got w={self.w} h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def moved(self, cx: float, cy: float, scale: float = 1.0, frame: Optional[int] = None) -> "BBox":
        """Box of this size times ``scale`` centered at (cx, cy)."""
        w, h = self.w * scale, self.h * scale
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h, self.frame if frame is None else frame, scale)

    def pixel_bounds(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Clipped integer pixel range (x0, y0, x1, y1) of pixels whose centers fall inside."""
        x0 = max(0, math.ceil(self.x - 0.5))
        y0 = max(0, math.ceil(self.y - 0.5))
        x1 = min(width, math.ceil(self.x + self.w - 0.5))
        y1 = min(height, math.ceil(self.y + self.h - 0.5))
        return x0, y0, max(x0, x1), max(y0, y1)


def iou(a: BBox, b: BBox) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def center_distance(a: BBox, b: BBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


@dataclass
class Track:
    target_id: int
    boxes: dict[int, BBox] = field(default_factory=dict)
    active: bool = True
    exit_frame: Optional[int] = None

    def __post_init__(self):
        if self.target_id < 1:
            raise ValueError("target ids start at 1")
        frames = sorted(self.boxes)
        if frames and frames != list(range(frames[0], frames[-1] + 1)):
            raise ValueError(f"track {self.target_id} has non-contiguous frames")

    def add(self, box: BBox) -> None:
        if self.boxes and box.frame != self.last_frame + 1:
            raise ValueError(f"track {self.target_id}: frame {box.frame} does not extend {self.last_frame}")
        self.boxes[box.frame] = box

    @property
    def last_frame(self) -> int:
        return max(self.boxes)

    @property
    def last_box(self) -> BBox:
        return self.boxes[self.last_frame]


@dataclass(frozen=True)
class VideoSegment:
    frames: tuple[Frame, ...]

    def __post_init__(self):
        if len(self.frames) < 2:
            raise ValueError("a segment needs at least 2 frames")
        idx = [f.index for f in self.frames]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise ValueError("segment frames must be consecutive")

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def start(self) -> int:
        return self.frames[0].index


@dataclass(frozen=True)
class PixelMask:
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int32)))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def from_boxes(cls, boxes: Mapping[int, BBox], width: int, height: int) -> "PixelMask":
        labels = np.zeros((height, width), dtype=np.int32)
        for tid, box in sorted(boxes.items()):
            x0, y0, x1, y1 = box.pixel_bounds(width, height)
            labels[y0:y1, x0:x1] = tid
        return cls(labels)


def exit_check(track: Track, frame: Frame, border_margin=None) -> bool:
    """True when the track's latest box sits near a border and moves toward it.

    ``border_margin`` is a pixel distance, or None for half the box size per axis.
    """
    if len(track.boxes) < 2:
        return False
    last = track.last_frame
    if last - 1 not in track.boxes:
        return False
    box = track.boxes[last]
    (cx, cy), (px, py) = box.center, track.boxes[last - 1].center
    vx, vy = cx - px, cy - py
    if border_margin is None:
        mx, my = 0.5 * box.w, 0.5 * box.h
    else:
        mx = my = float(border_margin)
    return (
        (cx <= mx and vx < 0)
        or (cx >= frame.width - mx and vx > 0)
        or (cy <= my and vy < 0)
        or (cy >= frame.height - my and vy > 0)
    )
