"""Small helpers shared by the generator and the discriminators."""

from __future__ import annotations

import math

import torch
from torch import nn


def halvings(size: int, n: int) -> list[int]:
    """``[size, ceil(size/2), ceil(size/4), ...]`` with ``n + 1`` entries.

    Every stride-2 layer in the encoders (k3/p1 convs, k7/p3 conv, k3/p1 max
    pool, ceil-mode 2x2 pools) maps ``s`` to ``ceil(s / 2)``, so this ladder is
    the spatial size after each downsampling stage.
    """
    out = [size]
    for _ in range(n):
        out.append(-(-out[-1] // 2))
    return out


def _fan_in(m: nn.Module) -> int:
    w = m.weight
    if isinstance(m, nn.Linear):
        return w.shape[1]
    receptive = math.prod(w.shape[2:])
    if isinstance(m, (nn.ConvTranspose2d, nn.ConvTranspose3d)):
        return w.shape[0] * receptive
    return w.shape[1] * receptive


def init_fan_in_uniform(module: nn.Module, seed: int, head: nn.Module | None = None) -> None:
    """He-style uniform init, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases.

    ``head`` (the final logit layer) uses gain 1 instead of sqrt(2).
    """
    gen = torch.Generator().manual_seed(int(seed))
    layer_types = (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.ConvTranspose3d, nn.Linear)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, layer_types):
                gain = 3.0 if m is head else 6.0
                bound = math.sqrt(gain / _fan_in(m))
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm3d)):
                m.reset_parameters()
                m.reset_running_stats()


def zero_parameters(module: nn.Module) -> None:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


def parameter_digest(module: nn.Module) -> str:
    """Content hash of all parameters, used to check which networks a step touched."""
    import hashlib

    h = hashlib.sha256()
    for name, p in module.state_dict().items():
        h.update(name.encode())
        h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
