"""Sequences on disk and in memory: loading, resizing, clips and template crops."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .geometry import BoundingBox, GroundTruthMask, ResizeTransform, rasterize_mask

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
MIN_FRAME_SIZE = 16


class AnnotationFormatError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    index: int
    image: np.ndarray  # H x W x 3 float32 in [0, 1]

    def __post_init__(self):
        img = self.image
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"frame image must be H x W x 3, got {img.shape}")
        if img.shape[0] < MIN_FRAME_SIZE or img.shape[1] < MIN_FRAME_SIZE:
            raise ValueError(f"frame must be at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}, got {img.shape[:2]}")

    @classmethod
    def from_array(cls, index: int, image: np.ndarray) -> "Frame":
        if image.dtype == np.uint8:
            image = image.astype(np.float32) / 255.0
        else:
            image = np.clip(np.asarray(image, dtype=np.float32), 0.0, 1.0)
        if image.ndim == 2:
            image = np.repeat(image[:, :, None], 3, axis=2)
        return cls(index, _frozen(np.ascontiguousarray(image)))

    @property
    def original_size(self) -> tuple[int, int]:
        return self.image.shape[0], self.image.shape[1]


@dataclass(frozen=True)
class Sequence:
    """Ordered frames with one optional box per frame (``None`` = target not visible)."""

    frames: tuple[Frame, ...]
    annotations: tuple[Optional[BoundingBox], ...]
    name: str = "sequence"

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if len(self.frames) != len(self.annotations):
            raise ValueError(f"{len(self.frames)} frames but {len(self.annotations)} annotations")
        if not self.frames:
            raise ValueError("sequence has no frames")
        if self.annotations[0] is None:
            raise ValueError("the first frame must be annotated")
        indices = [f.index for f in self.frames]
        if len(set(indices)) != len(indices):
            raise ValueError("frame indices must be unique")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_size(self) -> tuple[int, int]:
        return self.frames[0].original_size


# ---------------------------------------------------------------- annotation I/O

_ABSENT = {"nan", "none", ""}


def parse_annotation_line(line: str, lineno: int = 1) -> Optional[BoundingBox]:
    parts = [p for p in re.split(r"[,\t ]+", line.strip()) if p != ""]
    if len(parts) != 4:
        raise AnnotationFormatError(f"line {lineno}: expected 4 values 'x,y,w,h', got {line.strip()!r}")
    if all(p.lower() in _ABSENT for p in parts):
        return None
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError:
        raise AnnotationFormatError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    if any(math.isnan(v) for v in (x, y, w, h)) or (w == 0 and h == 0):
        return None
    if w <= 0 or h <= 0 or not all(math.isfinite(v) for v in (x, y, w, h)):
        raise AnnotationFormatError(f"line {lineno}: invalid box {line.strip()!r}")
    return BoundingBox(x, y, w, h)


def read_annotations(path: str | Path) -> list[Optional[BoundingBox]]:
    lines = Path(path).read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return [parse_annotation_line(line, i + 1) for i, line in enumerate(lines)]


def format_box(box: Optional[BoundingBox]) -> str:
    if box is None:
        return "0,0,0,0"
    return ",".join(repr(float(v)) for v in box.as_tuple())


def write_annotations(path: str | Path, boxes) -> None:
    Path(path).write_text("".join(format_box(b) + "\n" for b in boxes))


# ---------------------------------------------------------------- sequence I/O

def _layout(path: Path, fmt: str) -> tuple[Path, Path]:
    if fmt == "got10k":
        return path, path / "groundtruth.txt"
    if fmt == "otb":
        return path / "img", path / "groundtruth_rect.txt"
    raise ValueError(f"unknown sequence format {fmt!r} (expected 'got10k' or 'otb')")


def load_sequence(path: str | Path, format: str = "got10k") -> Sequence:
    """Read a directory of frames plus a ``x,y,w,h`` ground-truth file.

    ``got10k`` expects images and ``groundtruth.txt`` side by side; ``otb``
    expects ``img/`` and ``groundtruth_rect.txt``. Frames are taken in
    lexicographic file order.
    """
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {path}")
    img_dir, gt_file = _layout(path, format)
    if not gt_file.is_file():
        raise FileNotFoundError(f"annotation file not found: {gt_file}")
    files = sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES) if img_dir.is_dir() else []
    boxes = read_annotations(gt_file)
    if len(files) != len(boxes):
        raise AnnotationFormatError(
            f"{path.name}: {len(files)} frames but {len(boxes)} annotation lines")
    frames = []
    for i, f in enumerate(files):
        with Image.open(f) as im:
            frames.append(Frame.from_array(i, np.asarray(im.convert("RGB"))))
    return Sequence(frames, boxes, name=path.name)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_sequence(seq: Sequence, path: str | Path) -> Path:
    """Write ``seq`` in GOT-10k layout (``00000.png`` ... plus ``groundtruth.txt``)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        Image.fromarray(to_uint8(frame.image)).save(path / f"{i:05d}.png")
    write_annotations(path / "groundtruth.txt", seq.annotations)
    return path


def save_mask_png(mask: np.ndarray | GroundTruthMask, path: str | Path) -> None:
    if isinstance(mask, GroundTruthMask):
        mask = mask.mask
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(path)


# ---------------------------------------------------------------- resizing

def resize_image(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear (antialiased when shrinking) resize of an H x W x C float image."""
    if image.shape[0] == height and image.shape[1] == width:
        return np.array(image, dtype=np.float32)
    t = torch.from_numpy(np.array(image, dtype=np.float32)).permute(2, 0, 1)[None]
    out = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False, antialias=True)
    return out[0].permute(1, 2, 0).clamp_(0.0, 1.0).numpy()


def resize_and_normalize(frame: Frame | np.ndarray, R: int) -> tuple[np.ndarray, ResizeTransform]:
    """Stretch a frame to ``R x R`` (aspect ratio is not preserved).

    Returns the resized image and the transform from original to resized
    coordinates; ``transform.inverse()`` maps back.
    """
    if R <= 0:
        raise ValueError(f"resolution must be positive, got {R}")
    if R < MIN_FRAME_SIZE:
        raise ValueError(f"resolution must be at least {MIN_FRAME_SIZE}, got {R}")
    image = frame.image if isinstance(frame, Frame) else Frame.from_array(0, frame).image
    h, w = image.shape[:2]
    return resize_image(image, R, R), ResizeTransform.between((h, w), (R, R))


def clip_indices(center: int, length: int, num_frames: int, causal: bool = False) -> list[int]:
    """Source indices of an ``length``-frame window centred on ``center``.

    Out-of-range positions replicate the first/last frame. With ``causal`` the
    last available frame is ``center`` itself, so no future frame is read.
    """
    if length < 1:
        raise ValueError("clip length must be >= 1")
    last = center if causal else num_frames - 1
    offsets = range(-(length // 2), length - length // 2)
    return [min(max(center + o, 0), last) for o in offsets]


@dataclass(frozen=True)
class Clip:
    frames: np.ndarray  # L x R x R x 3
    center_index: int
    source_indices: tuple[int, ...] = field(default=())
    transform: ResizeTransform = ResizeTransform(1.0, 1.0)

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def center_position(self) -> int:
        return self.length // 2

    def as_tensor(self) -> torch.Tensor:
        """``1 x 3 x L x R x R`` float tensor."""
        return torch.from_numpy(np.ascontiguousarray(self.frames)).permute(3, 0, 1, 2)[None].float()


def make_clip(seq: Sequence, center: int, length: int = 3, R: int = 300,
              causal: bool = False, resized: Optional[list[np.ndarray]] = None) -> Clip:
    idx = clip_indices(center, length, len(seq), causal=causal)
    if resized is None:
        frames = [resize_and_normalize(seq.frames[i], R)[0] for i in idx]
    else:
        frames = [resized[i] for i in idx]
    transform = ResizeTransform.between(seq.frame_size, (R, R))
    return Clip(_frozen(np.stack(frames)), center, tuple(idx), transform)


def clip_masks(seq: Sequence, indices, R: int) -> np.ndarray:
    """Ground-truth masks (``L x R x R`` float32) for the given source frames."""
    tf = ResizeTransform.between(seq.frame_size, (R, R))
    out = []
    for i in indices:
        box = seq.annotations[i]
        box = None if box is None else tf.apply(box).clip(R, R)
        out.append(rasterize_mask(box, R).mask)
    return np.stack(out).astype(np.float32)


def crop_template(frame: Frame | np.ndarray, box: BoundingBox, size: int) -> np.ndarray:
    """Exact box crop (no context padding), resized to ``size x size``."""
    image = frame.image if isinstance(frame, Frame) else frame
    h, w = image.shape[:2]
    x0, y0 = max(int(math.floor(box.x)), 0), max(int(math.floor(box.y)), 0)
    x1, y1 = min(int(math.ceil(box.x2)), w), min(int(math.ceil(box.y2)), h)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"template crop is empty for box {box.as_tuple()} in a {w}x{h} frame")
    return resize_image(image[y0:y1, x0:x1], size, size)
