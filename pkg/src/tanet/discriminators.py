"""Appearance and motion discriminators.

Both take images concatenated with attention maps (3 + 1 channels) and return
a realism score in ``(eps, 1 - eps)``.

Appearance stack at the faithful 240 x 240 input::

    Conv2d 4->96   k7 s2 p3 ReLU   120 x 120
    MaxPool 2 s2                    60 x 60
    Conv2d 96->256 k3 s2 p1 ReLU    30 x 30
    MaxPool 2 s2                    15 x 15
    Conv2d 256->256 k3 s1 p1 ReLU   15 x 15   -> flatten 57600
    Linear 57600->256 ReLU, Linear 256->1 (logit)

Motion stack at the faithful 4 x 3 x 240 x 240 input (C x T x H x W)::

    Conv3d 4->64 k3 p1 ReLU                      64 x 3 x 240 x 240
    MaxPool3d k(1,2,2) s(1,2,2)                  64 x 3 x 120 x 120
    Conv3d 64->128 ReLU                         128 x 3 x 120 x 120
    MaxPool3d k(2,2,2) s(2,2,2)                 128 x 1 x 60 x 60
    Conv3d 128->256, 256->256 ReLU              256 x 1 x 60 x 60
    MaxPool3d k(2,2,2) s(2,2,2)*                256 x 1 x 30 x 30
    Conv3d 256->512, 512->512 ReLU              512 x 1 x 30 x 30
    MaxPool3d k(1,2,2) s(2,2,2) p(0,1,1)        512 x 1 x 16 x 16
    Conv3d 512->512, 512->512 ReLU              512 x 1 x 16 x 16
    mean over time                              512 x 16 x 16
    Conv2d 512->100 k3 s2 p1 ReLU               100 x 8 x 8
    MaxPool2d 3 s2                              100 x 3 x 3  -> flatten 900
    Linear 900->256 ReLU, Linear 256->1 (logit)

    * temporal pool extent and stride are clipped to the remaining depth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError
from .layers import init_fan_in_uniform

SCORE_EPS = 1e-7


def conv_out(n: int, k: int, s: int = 1, p: int = 0) -> int:
    return (n + 2 * p - k) // s + 1


@dataclass(frozen=True)
class DiscriminatorConfig:
    input_size: int = 240
    L: int = 3
    app_channels: tuple[int, int, int] = (96, 256, 256)
    app_hidden: int = 256
    mot_channels: tuple[int, ...] = (64, 128, 256, 256, 512, 512, 512, 512)
    mot_head_channels: int = 100
    mot_hidden: int = 256

    def __post_init__(self):
        object.__setattr__(self, "app_channels", tuple(int(c) for c in self.app_channels))
        object.__setattr__(self, "mot_channels", tuple(int(c) for c in self.mot_channels))
        if len(self.app_channels) != 3 or len(self.mot_channels) != 8:
            raise ValueError("appearance needs 3 conv widths, motion needs 8")
        if self.L < 1:
            raise ValueError("clip length must be >= 1")
        if appearance_flatten_size(self) <= 0 or motion_flatten_size(self) <= 0:
            raise ValueError(f"input_size {self.input_size} is too small for the discriminator stacks")

    @classmethod
    def faithful(cls, **kw) -> "DiscriminatorConfig":
        return cls(**kw)

    @classmethod
    def tiny(cls, **kw) -> "DiscriminatorConfig":
        kw.setdefault("input_size", 64)
        kw.setdefault("app_channels", (8, 16, 16))
        kw.setdefault("app_hidden", 32)
        kw.setdefault("mot_channels", (4, 8, 16, 16, 32, 32, 32, 32))
        kw.setdefault("mot_head_channels", 16)
        kw.setdefault("mot_hidden", 32)
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DiscriminatorConfig":
        return cls(**d)


def appearance_flatten_size(cfg: DiscriminatorConfig) -> int:
    s = conv_out(cfg.input_size, 7, 2, 3)
    s = conv_out(s, 2, 2)
    s = conv_out(s, 3, 2, 1)
    s = conv_out(s, 2, 2)
    s = conv_out(s, 3, 1, 1)
    return cfg.app_channels[2] * s * s


# (temporal kernel, temporal stride, spatial padding); spatial kernel/stride are 2
_MOTION_POOLS = ((1, 1, 0), (2, 2, 0), (2, 2, 0), (1, 2, 1))


def _motion_pools(L: int):
    """(kernel, stride, padding) of the four 3D pools for a clip of depth L, and the final depth."""
    specs, t = [], L
    for kt, st, pad in _MOTION_POOLS:
        if kt > t:
            kt, st = t, t
        specs.append(((kt, 2, 2), (st, 2, 2), (0, pad, pad)))
        t = conv_out(t, kt, st)
    return specs, t


def motion_flatten_size(cfg: DiscriminatorConfig) -> int:
    pools, _ = _motion_pools(cfg.L)
    s = cfg.input_size
    for (_, k, _), (_, st, _), (_, p, _) in pools:
        s = conv_out(s, k, st, p)
    s = conv_out(s, 3, 2, 1)
    s = conv_out(s, 3, 2)
    return cfg.mot_head_channels * s * s


def _as_map_batch(attn: torch.Tensor) -> torch.Tensor:
    return attn.unsqueeze(1) if attn.dim() == 3 else attn


def _resize(x: torch.Tensor, size: int) -> torch.Tensor:
    if x.shape[-1] == size and x.shape[-2] == size:
        return x
    return F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)


def _score(logit: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(logit).clamp(SCORE_EPS, 1.0 - SCORE_EPS).squeeze(-1)


class AppearanceDiscriminator(nn.Module):
    """Judges a single (image, attention map) pair."""

    def __init__(self, cfg: DiscriminatorConfig, seed: int = 0):
        super().__init__()
        self.config = cfg
        self.init_seed = int(seed)
        c1, c2, c3 = cfg.app_channels
        self.features = nn.Sequential(
            nn.Conv2d(4, c1, 7, stride=2, padding=3), nn.ReLU(),
            nn.MaxPool2d(2, 2),
            nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.ReLU(),
            nn.MaxPool2d(2, 2),
            nn.Conv2d(c2, c3, 3, stride=1, padding=1), nn.ReLU(),
        )
        self.flatten_size = appearance_flatten_size(cfg)
        self.fc1 = nn.Linear(self.flatten_size, cfg.app_hidden)
        self.fc2 = nn.Linear(cfg.app_hidden, 1)
        init_fan_in_uniform(self, seed, head=self.fc2)

    def logits(self, image: torch.Tensor, attn: torch.Tensor) -> torch.Tensor:
        attn = _as_map_batch(attn)
        if image.dim() != 4 or image.shape[1] != 3 or attn.shape[1] != 1:
            raise ShapeError(f"expected N x 3 x H x W image and N x 1 x H x W map, "
                             f"got {tuple(image.shape)} and {tuple(attn.shape)}")
        if image.shape[0] != attn.shape[0] or image.shape[-2:] != attn.shape[-2:]:
            raise ShapeError(f"image {tuple(image.shape)} and map {tuple(attn.shape)} do not align")
        s = self.config.input_size
        x = torch.cat([_resize(image, s), _resize(attn, s)], dim=1)
        x = self.features(x).flatten(1)
        return self.fc2(F.relu(self.fc1(x)))

    def forward(self, image: torch.Tensor, attn: torch.Tensor) -> torch.Tensor:
        return _score(self.logits(image, attn))


class MotionDiscriminator(nn.Module):
    """Judges a tube of L frames stacked with their L attention maps."""

    def __init__(self, cfg: DiscriminatorConfig, seed: int = 0):
        super().__init__()
        self.config = cfg
        self.init_seed = int(seed)
        w = cfg.mot_channels
        pools, self.out_depth = _motion_pools(cfg.L)
        pool = lambda i: nn.MaxPool3d(*pools[i])
        conv = lambda a, b: [nn.Conv3d(a, b, 3, padding=1), nn.ReLU()]
        self.features3d = nn.Sequential(
            *conv(4, w[0]), pool(0),
            *conv(w[0], w[1]), pool(1),
            *conv(w[1], w[2]), *conv(w[2], w[3]), pool(2),
            *conv(w[3], w[4]), *conv(w[4], w[5]), pool(3),
            *conv(w[5], w[6]), *conv(w[6], w[7]),
        )
        self.features2d = nn.Sequential(
            nn.Conv2d(w[7], cfg.mot_head_channels, 3, stride=2, padding=1), nn.ReLU(),
            nn.MaxPool2d(3, 2),
        )
        self.flatten_size = motion_flatten_size(cfg)
        self.fc1 = nn.Linear(self.flatten_size, cfg.mot_hidden)
        self.fc2 = nn.Linear(cfg.mot_hidden, 1)
        init_fan_in_uniform(self, seed, head=self.fc2)

    def logits(self, clip: torch.Tensor, maps: torch.Tensor) -> torch.Tensor:
        if clip.dim() != 5 or clip.shape[1] != 3:
            raise ShapeError(f"clip: expected N x 3 x L x H x W, got {tuple(clip.shape)}")
        if maps.dim() == 5:
            maps = maps.squeeze(1)
        n, _, L, h, w = clip.shape
        if L != self.config.L:
            raise ShapeError(f"clip has {L} frames, discriminator configured for {self.config.L}")
        if tuple(maps.shape) != (n, L, h, w):
            raise ShapeError(f"expected {L} maps of {h} x {w} per clip, got {tuple(maps.shape)}")
        s = self.config.input_size
        frames = _resize(clip.permute(0, 2, 1, 3, 4).reshape(n * L, 3, h, w), s)
        frames = frames.reshape(n, L, 3, s, s).permute(0, 2, 1, 3, 4)
        maps = _resize(maps, s).unsqueeze(1)
        x = self.features3d(torch.cat([frames, maps], dim=1)).mean(dim=2)
        x = self.features2d(x).flatten(1)
        return self.fc2(F.relu(self.fc1(x)))

    def forward(self, clip: torch.Tensor, maps: torch.Tensor) -> torch.Tensor:
        return _score(self.logits(clip, maps))
