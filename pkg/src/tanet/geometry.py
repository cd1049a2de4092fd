"""Boxes, overlap, coordinate transforms and box-to-mask rasterization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: left edge ``x``, top edge ``y``, width ``w``, height ``h`` (pixels)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def clip(self, width: float, height: float) -> "BoundingBox | None":
        """Intersect with the frame ``[0, width] x [0, height]``; ``None`` if nothing is left."""
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, float(width)), min(self.y2, float(height))
        if x2 <= x1 or y2 <= y1:
            return None
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def scale(self, sx: float, sy: float | None = None) -> "BoundingBox":
        sy = sx if sy is None else sy
        return BoundingBox(self.x * sx, self.y * sy, self.w * sx, self.h * sy)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return min(inter / (a.area + b.area - inter), 1.0)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


@dataclass(frozen=True)
class ResizeTransform:
    """Per-axis scaling between original-frame and resized coordinates."""

    sx: float
    sy: float

    @classmethod
    def between(cls, src_hw: tuple[int, int], dst_hw: tuple[int, int]) -> "ResizeTransform":
        return cls(dst_hw[1] / src_hw[1], dst_hw[0] / src_hw[0])

    @property
    def is_identity(self) -> bool:
        return self.sx == 1.0 and self.sy == 1.0

    def inverse(self) -> "ResizeTransform":
        return ResizeTransform(1.0 / self.sx, 1.0 / self.sy)

    def apply(self, box: BoundingBox) -> BoundingBox:
        return box.scale(self.sx, self.sy)

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        return x * self.sx, y * self.sy


@dataclass(frozen=True)
class GroundTruthMask:
    """Binary foreground mask rasterized from a box given in mask coordinates.

    ``degenerate`` is set when the clipped box covers no pixel centre; the mask
    is then all zeros and callers treat the target as absent.
    """

    mask: np.ndarray
    source_box: BoundingBox | None
    degenerate: bool = False


def _center_span(lo: float, hi: float, n: int) -> tuple[int, int]:
    # integer pixels c with lo <= c + 0.5 < hi
    start = max(math.ceil(lo - 0.5), 0)
    stop = min(math.ceil(hi - 0.5), n)
    return start, max(stop, start)


def rasterize_mask(box: BoundingBox | None, size: int | tuple[int, int]) -> GroundTruthMask:
    """Fill the pixels whose centres fall inside ``box`` with ones.

    ``size`` is ``R`` for an ``R x R`` mask or ``(H, W)``. The box interval is
    half-open, so ``(0, 0, 2, 2)`` covers exactly pixels (0,0), (0,1), (1,0), (1,1).
    """
    h, w = (size, size) if isinstance(size, int) else size
    if h <= 0 or w <= 0:
        raise ValueError(f"mask size must be positive, got {(h, w)}")
    mask = np.zeros((h, w), dtype=np.uint8)
    if box is None:
        return GroundTruthMask(mask, None, degenerate=True)
    r0, r1 = _center_span(box.y, box.y2, h)
    c0, c1 = _center_span(box.x, box.x2, w)
    if r1 <= r0 or c1 <= c0:
        return GroundTruthMask(mask, box, degenerate=True)
    mask[r0:r1, c0:c1] = 1
    return GroundTruthMask(mask, box, degenerate=False)
