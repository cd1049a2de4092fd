"""Joint local/global search over a pluggable baseline tracker.

The switch rule: after a confident frame (score above ``beta1``) search
locally; after a low-confidence frame keep searching locally while the fail
counter is below ``beta2``; otherwise predict an attention map for the whole
frame, mine a global search region from it and reset the counter.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Protocol

import numpy as np
from scipy import ndimage, signal

from .data import Sequence, crop_template, make_clip, resize_and_normalize
from .geometry import BoundingBox, ResizeTransform

log = logging.getLogger(__name__)

LOCAL, GLOBAL = "local", "global"
INITIAL_SCORE = 1.0


# ---------------------------------------------------------------- regions

@dataclass(frozen=True)
class SearchRegion:
    """Axis-aligned search window in original frame pixels."""

    cx: float
    cy: float
    sw: float
    sh: float

    def __post_init__(self):
        if not (self.sw > 0 and self.sh > 0):
            raise ValueError(f"search region needs positive size, got {self.sw} x {self.sh}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def size(self) -> tuple[float, float]:
        return (self.sw, self.sh)

    @classmethod
    def whole_frame(cls, width: int, height: int) -> "SearchRegion":
        return cls(width / 2.0, height / 2.0, float(width), float(height))

    @classmethod
    def around(cls, box: BoundingBox, scale: float, width: int, height: int,
               center: Optional[tuple[float, float]] = None) -> "SearchRegion":
        """Window of ``scale`` times the box size, centred on ``center`` (default the box centre), clipped."""
        cx, cy = center if center is not None else box.center
        return cls(cx, cy, box.w * scale, box.h * scale).clip(width, height)

    def clip(self, width: int, height: int) -> "SearchRegion":
        x0, y0 = max(self.cx - self.sw / 2, 0.0), max(self.cy - self.sh / 2, 0.0)
        x1, y1 = min(self.cx + self.sw / 2, float(width)), min(self.cy + self.sh / 2, float(height))
        if x1 <= x0 or y1 <= y0:
            return SearchRegion.whole_frame(width, height)
        return SearchRegion((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)

    def pixel_bounds(self, width: int, height: int, min_w: int = 1, min_h: int = 1) -> tuple[int, int, int, int]:
        """Integer ``(x0, y0, x1, y1)`` inside the frame, grown (and shifted inwards) to at least ``min_w x min_h``."""
        x0 = int(math.floor(self.cx - self.sw / 2 + 0.5))
        y0 = int(math.floor(self.cy - self.sh / 2 + 0.5))
        x1 = int(math.floor(self.cx + self.sw / 2 + 0.5))
        y1 = int(math.floor(self.cy + self.sh / 2 + 0.5))
        x0, x1 = _fit_span(x0, x1, min_w, width)
        y0, y1 = _fit_span(y0, y1, min_h, height)
        return x0, y0, x1, y1


def _fit_span(lo: int, hi: int, need: int, n: int) -> tuple[int, int]:
    lo, hi = max(lo, 0), min(hi, n)
    if hi - lo < need:
        grow = need - (hi - lo)
        lo -= grow // 2
        hi += grow - grow // 2
        if lo < 0:
            hi, lo = hi - lo, 0
        if hi > n:
            lo, hi = max(lo - (hi - n), 0), n
    return lo, hi


# ---------------------------------------------------------------- baseline contract

class BaselineTracker(Protocol):
    """What the switch needs from a short-term tracker; scores are normalised to [0, 1]."""

    def init(self, image: np.ndarray, box: BoundingBox) -> None: ...

    def step(self, image: np.ndarray, region: SearchRegion) -> tuple[BoundingBox, float]: ...


class NCCResult(NamedTuple):
    box: BoundingBox
    score: float
    low_confidence: bool


_VAR_EPS = 1e-10


def _window_sums(a: np.ndarray, h: int, w: int) -> np.ndarray:
    """Sums of ``a`` (2D) over every ``h x w`` window, 'valid' placements only."""
    ii = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    ii[1:, 1:] = a.cumsum(0).cumsum(1)
    return ii[h:, w:] - ii[:-h, w:] - ii[h:, :-w] + ii[:-h, :-w]


def ncc_map(region: np.ndarray, template: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-mean normalised cross-correlation of ``template`` at every valid placement.

    Channels are pooled into one correlation. Returns ``(ncc, window_variance)``;
    placements with (near) zero variance get ``ncc = 0``.
    """
    region = np.asarray(region, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if region.ndim == 2:
        region = region[..., None]
    if template.ndim == 2:
        template = template[..., None]
    h, w = template.shape[:2]
    if region.shape[0] < h or region.shape[1] < w:
        raise ValueError(f"search region {region.shape[1]}x{region.shape[0]} is smaller than "
                         f"the template {w}x{h}")
    n = template.size
    t0 = template - template.mean()
    tnorm = math.sqrt(float((t0 ** 2).sum()))
    if tnorm <= math.sqrt(_VAR_EPS * n):
        raise ValueError("template has zero variance")
    num = sum(signal.correlate(region[..., c], t0[..., c], mode="valid") for c in range(region.shape[2]))
    s1 = _window_sums(region.sum(axis=2), h, w)
    s2 = _window_sums((region ** 2).sum(axis=2), h, w)
    var = np.maximum(s2 - s1 ** 2 / n, 0.0)
    ok = var > _VAR_EPS * n
    ncc = np.zeros_like(num)
    ncc[ok] = num[ok] / (np.sqrt(var[ok]) * tnorm)
    return np.clip(ncc, -1.0, 1.0), var


def ncc_step(image: np.ndarray, template: np.ndarray, region: SearchRegion) -> NCCResult:
    """Best template placement inside ``region``; score is ``(NCC + 1) / 2``."""
    H, W = image.shape[:2]
    h, w = template.shape[:2]
    x0, y0, x1, y1 = region.pixel_bounds(W, H)
    if x1 - x0 < w or y1 - y0 < h:
        raise ValueError(f"search region {x1 - x0}x{y1 - y0} is smaller than the template {w}x{h}")
    ncc, var = ncc_map(image[y0:y1, x0:x1], template)
    dy, dx = np.unravel_index(int(np.argmax(ncc)), ncc.shape)
    best = float(ncc[dy, dx])
    low = bool(var[dy, dx] <= _VAR_EPS * template.size or best <= 0.0)
    box = BoundingBox(float(x0 + dx), float(y0 + dy), float(w), float(h))
    return NCCResult(box, (best + 1.0) / 2.0, low)


class NCCTracker:
    """Fixed-template correlation tracker (no online update).

    The template is the integer-rounded box crop of the first frame; search
    windows smaller than the template are grown to fit it.
    """

    def __init__(self):
        self.template: Optional[np.ndarray] = None
        self.last_low_confidence = False

    def init(self, image: np.ndarray, box: BoundingBox) -> None:
        H, W = image.shape[:2]
        x0, y0 = int(round(box.x)), int(round(box.y))
        x1, y1 = min(x0 + max(int(round(box.w)), 1), W), min(y0 + max(int(round(box.h)), 1), H)
        x0, y0 = max(x0, 0), max(y0, 0)
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"initial box {box.as_tuple()} has no pixels inside the frame")
        self.template = np.array(image[y0:y1, x0:x1], dtype=np.float64)

    def step(self, image: np.ndarray, region: SearchRegion) -> tuple[BoundingBox, float]:
        if self.template is None:
            raise RuntimeError("NCCTracker.step called before init")
        H, W = image.shape[:2]
        h, w = self.template.shape[:2]
        x0, y0, x1, y1 = region.pixel_bounds(W, H, w, h)
        fitted = SearchRegion((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)
        res = ncc_step(image, self.template, fitted)
        self.last_low_confidence = res.low_confidence
        return res.box, res.score


# ---------------------------------------------------------------- attention mining

@dataclass(frozen=True)
class Component:
    label: int
    mean: float
    area: int
    centroid: tuple[float, float]  # (x, y), pixel centres at +0.5
    distance: float


def rank_components(attn: np.ndarray, tau: float = 0.5,
                    prev_center: Optional[tuple[float, float]] = None) -> list[Component]:
    """Components of ``attn >= tau * max``, best first.

    Order: higher mean activation, then larger area, then smaller distance to
    ``prev_center`` (all in attention-map pixels).
    """
    attn = np.asarray(attn, dtype=np.float64)
    peak = float(attn.max()) if attn.size else 0.0
    if not peak > 0.0:
        return []
    labels, n = ndimage.label(attn >= tau * peak, structure=np.ones((3, 3), dtype=int))
    idx = np.arange(1, n + 1)
    means = ndimage.mean(attn, labels, idx)
    areas = ndimage.sum(np.ones_like(attn), labels, idx)
    cents = ndimage.center_of_mass(np.ones_like(attn), labels, idx)
    px, py = prev_center if prev_center is not None else (attn.shape[1] / 2, attn.shape[0] / 2)
    comps = []
    for k, m, a, (cy, cx) in zip(idx, means, areas, cents):
        c = (cx + 0.5, cy + 0.5)
        comps.append(Component(int(k), float(m), int(a), c, math.hypot(c[0] - px, c[1] - py)))
    comps.sort(key=lambda c: (-c.mean, -c.area, c.distance, c.label))
    return comps


def mine_global_candidates(attn: np.ndarray, prev_box: BoundingBox, frame_size: tuple[int, int],
                           transform: Optional[ResizeTransform] = None, tau: float = 0.5,
                           scale: float = 4.0) -> SearchRegion:
    """Search region around the best attention component.

    ``transform`` maps original frame coordinates to attention-map coordinates
    (identity if omitted); ``frame_size`` is ``(height, width)`` of the
    original frame. An empty map falls back to the whole frame.
    """
    H, W = frame_size
    tf = transform or ResizeTransform(1.0, 1.0)
    comps = rank_components(attn, tau, tf.apply_point(*prev_box.center))
    if not comps:
        log.debug("empty attention map, searching the whole frame")
        return SearchRegion.whole_frame(W, H)
    cx, cy = tf.inverse().apply_point(*comps[0].centroid)
    return SearchRegion.around(prev_box, scale, W, H, center=(cx, cy))


# ---------------------------------------------------------------- switch

@dataclass(frozen=True)
class TrackerConfig:
    beta1: float = 0.8
    beta2: float = 5
    k_local: float = 2.0
    k_global: float = 4.0
    tau: float = 0.5
    local_only: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta1 <= 1.0:
            raise ValueError("beta1 is a response threshold in [0, 1]")
        if self.beta2 < 0:
            raise ValueError("beta2 must be >= 0")
        if self.k_local <= 0 or self.k_global <= 0:
            raise ValueError("window scales must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")

    @property
    def fail_limit(self) -> float:
        return math.inf if self.local_only else self.beta2


def switch_decision(prev_score: float, beta: int, beta1: float, beta2: float) -> tuple[str, int]:
    """``(mode, new_beta)`` for the next frame."""
    if prev_score > beta1:
        return LOCAL, beta
    if beta < beta2:
        return LOCAL, beta + 1
    return GLOBAL, 0


@dataclass(frozen=True)
class TrackResult:
    frame_index: int
    box: BoundingBox
    score: float
    mode_used: str
    fail_count: int = 0


class TrackingAborted(RuntimeError):
    """The baseline raised mid-sequence; ``results`` holds the frames tracked so far."""

    def __init__(self, frame_index: int, cause: BaseException, results: list[TrackResult]):
        super().__init__(f"baseline failed at frame {frame_index}: {type(cause).__name__}: {cause}")
        self.frame_index = frame_index
        self.cause = cause
        self.results = results


class AttentionModel(Protocol):
    resolution: int
    clip_length: int
    template_size: int

    def __call__(self, clip, template: np.ndarray) -> np.ndarray: ...


def track_sequence(seq: Sequence, init_box: Optional[BoundingBox], baseline: BaselineTracker,
                   attention: Optional[AttentionModel], cfg: TrackerConfig = TrackerConfig()) -> list[TrackResult]:
    """Track frames ``1 .. n-1``; frame 0 initialises the baseline with ``init_box``."""
    init_box = init_box if init_box is not None else seq.annotations[0]
    if init_box is None:
        raise ValueError(f"{seq.name}: no initial box")
    if attention is None and not cfg.local_only:
        raise ValueError("an attention model is required unless local_only is set")
    H, W = seq.frame_size
    baseline.init(seq.frames[0].image, init_box)
    template = None
    if attention is not None and not cfg.local_only:
        template = crop_template(seq.frames[0], init_box, attention.template_size)
    last_box, last_score, beta = init_box, INITIAL_SCORE, 0
    limit = cfg.fail_limit
    results: list[TrackResult] = []
    for i in range(1, len(seq)):
        mode, beta = switch_decision(last_score, beta, cfg.beta1, limit)
        image = seq.frames[i].image
        if mode == LOCAL:
            region = SearchRegion.around(last_box, cfg.k_local, W, H)
        else:
            clip = make_clip(seq, i, attention.clip_length, attention.resolution, causal=True)
            attn = attention(clip, template)
            region = mine_global_candidates(attn, last_box, (H, W), clip.transform, cfg.tau, cfg.k_global)
        try:
            box, score = baseline.step(image, region)
        except Exception as exc:
            raise TrackingAborted(i, exc, results) from exc
        box = box.clip(W, H) or last_box
        score = float(score)
        results.append(TrackResult(i, box, score, mode, beta))
        last_box, last_score = box, score
    return results


# ---------------------------------------------------------------- result files

def write_results(path: str | Path, results: list[TrackResult]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in results:
            b = r.box
            fh.write(f"{r.frame_index}, {b.x!r}, {b.y!r}, {b.w!r}, {b.h!r}, {r.score!r}, {r.mode_used}\n")
    return path


def read_results(path: str | Path) -> list[TrackResult]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 7 or parts[6] not in (LOCAL, GLOBAL):
            raise ValueError(f"{path}:{lineno}: expected 'frame_index, x, y, w, h, score, mode'")
        x, y, w, h, s = map(float, parts[1:6])
        out.append(TrackResult(int(parts[0]), BoundingBox(x, y, w, h), s, parts[6]))
    return out
