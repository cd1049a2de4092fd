"""Target-aware attention generator.

Layer table (``s`` = spatial size ladder from :func:`tanet.layers.halvings`)::

    motion      clip 3 x L x R x R
                tiny:     2 x [Conv3d k3 s(1,2,2) p1, ReLU, Conv3d k3 p1, ReLU]
                faithful: C3D: conv1a pool1(1,2,2) conv2a pool2 conv3a/b pool3
                          conv4a/b pool4 conv5a/b pool5, 2x2 ceil-mode pools, the
                          temporal pool extent clipped to the remaining depth
                -> mean over time -> C_m x s[-1] x s[-1]
    appearance  frame 3 x R x R
                tiny:     2 x [Conv2d k3 s2 p1, ReLU, Conv2d k3 p1, ReLU]
                faithful: ResNet-18 trunk (conv1 .. layer4), 512 channels
                -> C_a x s[-1] x s[-1]
    template    patch 3 x T x T, same trunk type as appearance (own weights)
                -> global average pool -> tiled to s[-1] x s[-1]
    fuse        concat([motion, appearance, template]) along channels
    decoder     per group: nearest upsample to the next ladder size, then three
                ConvTranspose2d k3 s1 p1 (+ReLU); channels halve per group
                -> Conv2d 1x1 -> logistic -> 1 x R x R

The motion feature is computed once per clip and shared by all L frames.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError
from .layers import halvings, init_fan_in_uniform

SCALES = ("faithful", "tiny")


@dataclass(frozen=True)
class GeneratorConfig:
    R: int = 300
    L: int = 3
    scale: str = "faithful"
    template_size: int = 128
    motion_channels: tuple[int, ...] = (64, 128, 256, 256, 512, 512, 512, 512)
    appearance_channels: tuple[int, ...] = (512,)
    template_channels: tuple[int, ...] = (512,)
    decoder_channels: tuple[int, ...] = (768, 384, 192, 96, 48)
    output_activation: str = "logistic"

    def __post_init__(self):
        for name in ("motion_channels", "appearance_channels", "template_channels", "decoder_channels"):
            object.__setattr__(self, name, tuple(int(c) for c in getattr(self, name)))
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}, got {self.scale!r}")
        if self.L < 1:
            raise ValueError("clip length L must be >= 1")
        if self.R < 16:
            raise ValueError("working resolution R must be >= 16")
        if self.output_activation != "logistic":
            raise ValueError("output_activation is fixed to 'logistic'")
        if self.scale == "tiny":
            for name in ("motion_channels", "appearance_channels", "template_channels"):
                if len(getattr(self, name)) != self.num_stages:
                    raise ValueError(f"tiny {name} needs one width per stage ({self.num_stages})")
        elif len(self.motion_channels) != 8:
            raise ValueError("faithful motion encoder needs 8 C3D widths")
        if len(self.decoder_channels) != self.num_stages:
            raise ValueError(f"decoder needs {self.num_stages} groups, got {len(self.decoder_channels)}")

    @property
    def num_stages(self) -> int:
        return 5 if self.scale == "faithful" else len(self.decoder_channels)

    @property
    def feature_size(self) -> int:
        return halvings(self.R, self.num_stages)[-1]

    @property
    def fused_channels(self) -> int:
        return self.motion_channels[-1] + self.appearance_channels[-1] + self.template_channels[-1]

    @classmethod
    def faithful(cls, **kw) -> "GeneratorConfig":
        kw.setdefault("R", 300)
        return cls(scale="faithful", **kw)

    @classmethod
    def tiny(cls, **kw) -> "GeneratorConfig":
        kw.setdefault("R", 64)
        kw.setdefault("template_size", 32)
        kw.setdefault("motion_channels", (8, 16))
        kw.setdefault("appearance_channels", (8, 16))
        kw.setdefault("template_channels", (8, 16))
        kw.setdefault("decoder_channels", (24, 12))
        return cls(scale="tiny", **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(**d)


# ---------------------------------------------------------------- encoders

def _tiny_stack2d(widths, in_ch=3) -> nn.Sequential:
    layers = []
    for w in widths:
        layers += [nn.Conv2d(in_ch, w, 3, stride=2, padding=1), nn.ReLU(),
                   nn.Conv2d(w, w, 3, padding=1), nn.ReLU()]
        in_ch = w
    return nn.Sequential(*layers)


def _resnet18_trunk() -> nn.Sequential:
    from torchvision.models import resnet18

    net = resnet18(weights=None)
    return nn.Sequential(net.conv1, net.bn1, net.relu, net.maxpool,
                         net.layer1, net.layer2, net.layer3, net.layer4)


class MotionEncoder(nn.Module):
    """3D conv encoder over a clip; time is averaged away at the end."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        layers: list[nn.Module] = []
        in_ch = 3
        if cfg.scale == "tiny":
            for w in cfg.motion_channels:
                layers += [nn.Conv3d(in_ch, w, 3, stride=(1, 2, 2), padding=1), nn.ReLU(),
                           nn.Conv3d(w, w, 3, padding=1), nn.ReLU()]
                in_ch = w
        else:
            depth = cfg.L
            widths = iter(cfg.motion_channels)
            # convs per C3D block; block 1 pools space only
            for block, n_conv in enumerate((1, 1, 2, 2, 2)):
                for _ in range(n_conv):
                    w = next(widths)
                    layers += [nn.Conv3d(in_ch, w, 3, padding=1), nn.ReLU()]
                    in_ch = w
                kt = 1 if block == 0 else min(2, depth)
                layers.append(nn.MaxPool3d((kt, 2, 2), stride=(kt, 2, 2), ceil_mode=True))
                depth = -(-(depth - kt) // kt) + 1
        self.body = nn.Sequential(*layers)

    def forward(self, clip: torch.Tensor) -> torch.Tensor:
        return self.body(clip).mean(dim=2)


class AppearanceEncoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig, widths=None):
        super().__init__()
        widths = cfg.appearance_channels if widths is None else widths
        self.body = _resnet18_trunk() if cfg.scale == "faithful" else _tiny_stack2d(widths)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class TemplateEncoder(AppearanceEncoder):
    """Appearance trunk whose output is pooled to a vector and tiled over the feature grid."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__(cfg, cfg.template_channels)

    def volume(self, template: torch.Tensor) -> torch.Tensor:
        return self.body(template)

    def forward(self, template: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
        vec = self.volume(template).mean(dim=(2, 3), keepdim=True)
        return vec.expand(-1, -1, size[0], size[1])


def fuse_features(motion: torch.Tensor, appearance: torch.Tensor, template: torch.Tensor) -> torch.Tensor:
    """Channel concatenation in the fixed order [motion, appearance, template]."""
    sizes = {tuple(t.shape[-2:]) for t in (motion, appearance, template)}
    if len(sizes) != 1:
        raise ShapeError(f"spatial sizes differ at fusion: motion {tuple(motion.shape[-2:])}, "
                         f"appearance {tuple(appearance.shape[-2:])}, template {tuple(template.shape[-2:])}")
    return torch.cat([motion, appearance, template], dim=1)


class AttentionDecoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        ladder = halvings(cfg.R, cfg.num_stages)
        self.sizes = list(reversed(ladder[:-1]))
        self.in_channels = cfg.fused_channels
        groups = []
        in_ch = cfg.fused_channels
        for w in cfg.decoder_channels:
            groups.append(nn.Sequential(
                nn.ConvTranspose2d(in_ch, w, 3, padding=1), nn.ReLU(),
                nn.ConvTranspose2d(w, w, 3, padding=1), nn.ReLU(),
                nn.ConvTranspose2d(w, w, 3, padding=1), nn.ReLU(),
            ))
            in_ch = w
        self.groups = nn.ModuleList(groups)
        self.head = nn.Conv2d(in_ch, 1, 1)
        self.feature_size = ladder[-1]

    def logits(self, encoded: torch.Tensor) -> torch.Tensor:
        if encoded.shape[1] != self.in_channels or tuple(encoded.shape[-2:]) != (self.feature_size,) * 2:
            raise ShapeError(f"decoder expects N x {self.in_channels} x {self.feature_size} x "
                             f"{self.feature_size}, got {tuple(encoded.shape)}")
        x = encoded
        for size, group in zip(self.sizes, self.groups):
            x = group(F.interpolate(x, size=(size, size), mode="nearest"))
        return self.head(x)

    def forward(self, encoded: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(encoded))


class AttentionGenerator(nn.Module):
    """Clip + template -> per-frame attention maps in [0, 1]."""

    def __init__(self, cfg: GeneratorConfig, seed: int = 0):
        super().__init__()
        self.config = cfg
        self.init_seed = int(seed)
        self.motion = MotionEncoder(cfg)
        self.appearance = AppearanceEncoder(cfg)
        self.template = TemplateEncoder(cfg)
        self.decoder = AttentionDecoder(cfg)
        init_fan_in_uniform(self, seed, head=self.decoder.head)

    # -- shape checks
    def _check_clip(self, clip: torch.Tensor) -> None:
        c = self.config
        expected = (3, c.L, c.R, c.R)
        if clip.dim() != 5 or tuple(clip.shape[1:]) != expected:
            raise ShapeError(f"clip: expected N x {' x '.join(map(str, expected))}, got {tuple(clip.shape)}")

    def _check_frames(self, frames: torch.Tensor) -> None:
        c = self.config
        if frames.dim() != 4 or tuple(frames.shape[1:]) != (3, c.R, c.R):
            raise ShapeError(f"frame: expected N x 3 x {c.R} x {c.R}, got {tuple(frames.shape)}")

    def _check_template(self, template: torch.Tensor) -> None:
        t = self.config.template_size
        if template.dim() != 4 or tuple(template.shape[1:]) != (3, t, t):
            raise ShapeError(f"template: expected N x 3 x {t} x {t}, got {tuple(template.shape)}")

    # -- stages
    def encode_motion(self, clip: torch.Tensor) -> torch.Tensor:
        self._check_clip(clip)
        return self.motion(clip)

    def encode_appearance(self, frames: torch.Tensor) -> torch.Tensor:
        self._check_frames(frames)
        return self.appearance(frames)

    def encode_template(self, template: torch.Tensor) -> torch.Tensor:
        self._check_template(template)
        s = self.config.feature_size
        return self.template(template, (s, s))

    def decode_attention(self, encoded: torch.Tensor) -> torch.Tensor:
        return self.decoder(encoded)

    def predict_attention(self, clip: torch.Tensor, template: torch.Tensor, mode: str = "train") -> torch.Tensor:
        """``train``: ``N x L x R x R`` (one map per clip frame); ``track``: ``N x 1 x R x R`` for the centre frame."""
        if mode not in ("train", "track"):
            raise ValueError(f"mode must be 'train' or 'track', got {mode!r}")
        self._check_clip(clip)
        n, _, L, R, _ = clip.shape
        f_m = self.encode_motion(clip)
        f_t = self.encode_template(template)
        if f_t.shape[0] != n:
            raise ShapeError(f"{f_t.shape[0]} templates for {n} clips")
        if mode == "track":
            frames = clip[:, :, L // 2]
            encoded = fuse_features(f_m, self.appearance(frames), f_t)
            return self.decoder(encoded)
        frames = clip.permute(0, 2, 1, 3, 4).reshape(n * L, 3, R, R)
        f_a = self.appearance(frames)
        h, w = f_a.shape[-2:]
        rep = lambda f: f.unsqueeze(1).expand(-1, L, -1, -1, -1).reshape(n * L, f.shape[1], h, w)
        maps = self.decoder(fuse_features(rep(f_m), f_a, rep(f_t)))
        return maps.reshape(n, L, R, R)

    def forward(self, clip: torch.Tensor, template: torch.Tensor) -> torch.Tensor:
        return self.predict_attention(clip, template, mode="train")


def to_clip_tensor(clips) -> torch.Tensor:
    """Stack ``Clip`` objects (or ``L x R x R x 3`` arrays) into ``N x 3 x L x R x R``."""
    arrays = [np.asarray(getattr(c, "frames", c), dtype=np.float32) for c in clips]
    return torch.from_numpy(np.stack(arrays)).permute(0, 4, 1, 2, 3).contiguous()


def to_image_tensor(images) -> torch.Tensor:
    """Stack ``H x W x 3`` arrays into ``N x 3 x H x W``."""
    return torch.from_numpy(np.stack([np.asarray(i, dtype=np.float32) for i in images])).permute(0, 3, 1, 2).contiguous()


class GeneratorAttention:
    """Numpy-facing wrapper used by the tracker: ``(clip, template) -> R x R`` map."""

    def __init__(self, generator: AttentionGenerator):
        self.generator = generator.eval()

    @property
    def resolution(self) -> int:
        return self.generator.config.R

    @property
    def clip_length(self) -> int:
        return self.generator.config.L

    @property
    def template_size(self) -> int:
        return self.generator.config.template_size

    @torch.no_grad()
    def __call__(self, clip, template: np.ndarray) -> np.ndarray:
        dtype = next(self.generator.parameters()).dtype
        x = to_clip_tensor([clip]).to(dtype)
        t = to_image_tensor([template]).to(dtype)
        return self.generator.predict_attention(x, t, mode="track")[0, 0].numpy()
