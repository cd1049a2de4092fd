"""Seeded synthetic tracking sequences: a moving target on a noisy background."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import Frame, Sequence
from .geometry import BoundingBox

SHAPES = ("square", "disc", "textured-patch")
MOTIONS = ("linear", "random-walk", "sinusoidal")


@dataclass(frozen=True)
class SyntheticSceneConfig:
    frame_size: int = 64
    num_frames: int = 30
    target_shape: str = "square"
    target_size: int = 12
    motion: str = "linear"
    speed: float = 2.0
    occlusion_windows: tuple[tuple[int, int], ...] = ()
    distractors: int = 0
    noise_sigma: float = 0.02
    seed: int = 0
    # optional overrides; drawn from the seed when None
    start: Optional[tuple[float, float]] = None
    heading: Optional[float] = None
    texture_cells: int = 4
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "occlusion_windows",
                           tuple(tuple(int(v) for v in w) for w in self.occlusion_windows))
        if self.frame_size < 16:
            raise ValueError(f"frame_size must be >= 16, got {self.frame_size}")
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if self.target_size <= 0:
            raise ValueError("target_size must be positive")
        if self.target_size > self.frame_size:
            raise ValueError(f"target_size {self.target_size} exceeds frame_size {self.frame_size}")
        if self.target_shape not in SHAPES:
            raise ValueError(f"target_shape must be one of {SHAPES}, got {self.target_shape!r}")
        if self.motion not in MOTIONS:
            raise ValueError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if self.speed < 0 or self.noise_sigma < 0 or self.distractors < 0:
            raise ValueError("speed, noise_sigma and distractors must be non-negative")
        for start, end in self.occlusion_windows:
            if not (0 <= start < end <= self.num_frames):
                raise ValueError(f"occlusion window {(start, end)} outside [0, {self.num_frames})")
            if start == 0:
                raise ValueError("the first frame cannot be occluded")

    def occluded(self, t: int) -> bool:
        return any(s <= t < e for s, e in self.occlusion_windows)


def _trajectory(cfg: SyntheticSceneConfig, rng: np.random.Generator,
                start=None, heading=None) -> np.ndarray:
    """Target centres, ``num_frames x 2`` as (cx, cy), kept fully inside the frame."""
    n, size = cfg.num_frames, cfg.frame_size
    lo, hi = cfg.target_size / 2.0, size - cfg.target_size / 2.0
    if start is None:
        start = rng.uniform(lo, hi, size=2)
    start = np.asarray(start, dtype=np.float64)
    if heading is None:
        heading = rng.uniform(0.0, 2.0 * math.pi)
    t = np.arange(n, dtype=np.float64)[:, None]
    if cfg.motion == "linear":
        direction = np.array([math.cos(heading), math.sin(heading)])
        centers = start[None, :] + cfg.speed * t * direction[None, :]
    elif cfg.motion == "random-walk":
        angles = rng.uniform(0.0, 2.0 * math.pi, size=n - 1)
        centers = np.empty((n, 2))
        centers[0] = start
        for i, a in enumerate(angles, start=1):
            step = cfg.speed * np.array([math.cos(a), math.sin(a)])
            centers[i] = np.clip(centers[i - 1] + step, lo, hi)
    else:
        # circular path around the frame centre; peak speed along the path is cfg.speed
        amp = 0.8 * (hi - lo) / 2.0
        mid = (lo + hi) / 2.0
        omega = cfg.speed / amp if amp > 0 else 0.0
        phase = t * omega + heading
        centers = np.hstack([mid + amp * np.sin(phase), mid + amp * np.cos(phase)])
    return np.clip(centers, lo, hi)


def _contrasting_color(rng: np.random.Generator, background: np.ndarray) -> np.ndarray:
    for _ in range(100):
        color = rng.uniform(0.0, 1.0, size=3)
        if np.abs(color - background).mean() > 0.35:
            return color
    return 1.0 - background


def _shape_mask(cfg: SyntheticSceneConfig, box: BoundingBox, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    px, py = xx + 0.5, yy + 0.5
    if cfg.target_shape == "disc":
        cx, cy = box.center
        return (px - cx) ** 2 + (py - cy) ** 2 <= (box.w / 2.0) ** 2
    return (px >= box.x) & (px < box.x2) & (py >= box.y) & (py < box.y2)


def _paint(canvas, cfg, box, color, texture, yy, xx):
    inside = _shape_mask(cfg, box, yy, xx)
    if texture is None:
        canvas[inside] = color
        return
    k = texture.shape[0]
    u = np.clip(((xx + 0.5 - box.x) / box.w * k).astype(int), 0, k - 1)
    v = np.clip(((yy + 0.5 - box.y) / box.h * k).astype(int), 0, k - 1)
    canvas[inside] = texture[v[inside], u[inside]]


def make_synthetic_sequence(cfg: SyntheticSceneConfig) -> Sequence:
    """Render a deterministic sequence; the seed fixes every pixel and box.

    Ground truth is absent exactly on occluded frames, where the target is not
    drawn at all. Distractors share the target's shape and size with a nearby
    colour and never appear in the annotations.
    """
    rng = np.random.default_rng(cfg.seed)
    n, size, s = cfg.num_frames, cfg.frame_size, float(cfg.target_size)

    background = rng.uniform(0.1, 0.9, size=3)
    ramp = rng.uniform(-0.15, 0.15, size=(2, 3))
    yy, xx = np.mgrid[0:size, 0:size]
    base = (background[None, None, :]
            + ramp[0][None, None, :] * (xx[..., None] / size - 0.5)
            + ramp[1][None, None, :] * (yy[..., None] / size - 0.5))

    color = _contrasting_color(rng, background)
    texture = None
    if cfg.target_shape == "textured-patch":
        k = cfg.texture_cells
        texture = rng.uniform(0.0, 1.0, size=(k, k, 3))
        texture[::2, ::2] = color  # keeps a dominant colour for saliency

    centers = _trajectory(cfg, rng, cfg.start, cfg.heading)
    decoys = []
    for _ in range(cfg.distractors):
        dcolor = np.clip(color + rng.normal(0.0, 0.08, size=3), 0.0, 1.0)
        dtex = None
        if texture is not None:
            dtex = np.clip(texture + rng.normal(0.0, 0.15, size=texture.shape), 0.0, 1.0)
        decoys.append((_trajectory(cfg, rng), dcolor, dtex))

    frames, boxes = [], []
    for t in range(n):
        canvas = base.copy()
        for traj, dcolor, dtex in decoys:
            dbox = BoundingBox.from_center(traj[t, 0], traj[t, 1], s, s)
            _paint(canvas, cfg, dbox, dcolor, dtex, yy, xx)
        box = BoundingBox.from_center(centers[t, 0], centers[t, 1], s, s)
        if cfg.occluded(t):
            boxes.append(None)
        else:
            _paint(canvas, cfg, box, color, texture, yy, xx)
            boxes.append(box)
        if cfg.noise_sigma > 0:
            canvas = canvas + rng.normal(0.0, cfg.noise_sigma, size=canvas.shape)
        # quantize so that sequences survive an 8-bit PNG round trip unchanged
        img = np.round(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8)
        frames.append(Frame.from_array(t, img))
    return Sequence(frames, boxes, name=cfg.name or f"synth_{cfg.seed:05d}")


def synthetic_suite(base: SyntheticSceneConfig, seeds) -> list[Sequence]:
    return [make_synthetic_sequence(replace(base, seed=int(sd), name=f"synth_{int(sd):05d}")) for sd in seeds]
