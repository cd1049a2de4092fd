import math

import numpy as np
import pytest
import torch

from tanet.discriminators import (SCORE_EPS, AppearanceDiscriminator, DiscriminatorConfig, MotionDiscriminator,
                                  appearance_flatten_size, motion_flatten_size)
from tanet.errors import ShapeError
from tanet.layers import zero_parameters

TINY = DiscriminatorConfig.tiny()


def _pair(n=2, size=64, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 3, size, size, generator=g), torch.rand(n, size, size, generator=g)


def _tube(n=2, L=3, size=64, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 3, L, size, size, generator=g), torch.rand(n, L, size, size, generator=g)


def test_flatten_sizes():
    assert appearance_flatten_size(DiscriminatorConfig()) == 57600
    assert motion_flatten_size(DiscriminatorConfig()) == 900
    assert AppearanceDiscriminator(TINY).flatten_size == appearance_flatten_size(TINY)


def test_too_small_input_rejected():
    with pytest.raises(ValueError, match="too small"):
        DiscriminatorConfig.tiny(input_size=32)
    with pytest.raises(ValueError):
        DiscriminatorConfig(app_channels=(1, 2))


def test_zero_weights_score_half():
    da, dm = AppearanceDiscriminator(TINY), MotionDiscriminator(TINY)
    zero_parameters(da)
    zero_parameters(dm)
    assert torch.equal(da(*_pair()), torch.full((2,), 0.5))
    assert torch.equal(dm(*_tube()), torch.full((2,), 0.5))


def test_scores_in_open_interval():
    da, dm = AppearanceDiscriminator(TINY, seed=1), MotionDiscriminator(TINY, seed=2)
    with torch.no_grad():
        for p in list(da.parameters()) + list(dm.parameters()):
            p.mul_(50.0)
    for scale in (1.0, 1e4, -1e4):
        img, attn = _pair()
        for s in (da(img * scale, attn), dm(_tube()[0] * scale, _tube()[1])):
            assert (s >= SCORE_EPS).all() and (s <= 1 - SCORE_EPS).all()
            assert torch.isfinite(torch.log(s)).all() and torch.isfinite(torch.log1p(-s)).all()


def test_determinism_and_map_layouts():
    da = AppearanceDiscriminator(TINY, seed=4)
    img, attn = _pair()
    assert torch.equal(da(img, attn), AppearanceDiscriminator(TINY, seed=4)(img, attn))
    assert torch.equal(da(img, attn), da(img, attn[:, None]))


def test_inputs_resized_to_configured_size():
    da = AppearanceDiscriminator(TINY, seed=4)
    img, attn = _pair(size=80)
    assert da(img, attn).shape == (2,)


def test_shape_errors():
    da, dm = AppearanceDiscriminator(TINY), MotionDiscriminator(TINY)
    img, attn = _pair()
    with pytest.raises(ShapeError):
        da(img[:, :2], attn)
    with pytest.raises(ShapeError):
        da(img, attn[:1])
    clip, maps = _tube()
    with pytest.raises(ShapeError, match="maps"):
        dm(clip, maps[:, :2])
    with pytest.raises(ShapeError, match="frames"):
        dm(clip[:, :, :2], maps[:, :2])


def test_motion_depends_on_temporal_order():
    dm = MotionDiscriminator(TINY, seed=7)
    clip, maps = _tube()
    perm = [2, 0, 1]
    assert not torch.allclose(dm(clip, maps), dm(clip[:, :, perm], maps[:, perm]))


def _randomize_biases(module, seed):
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in module.named_parameters():
            if name.endswith("bias"):
                p.uniform_(-0.1, 0.1, generator=g)


@pytest.mark.parametrize("kind", ["appearance", "motion"])
def test_log_score_gradcheck(kind):
    torch.manual_seed(0)
    if kind == "appearance":
        d = AppearanceDiscriminator(TINY, seed=5).double()
        x, attn = (t.double() for t in _pair(1))
    else:
        d = MotionDiscriminator(TINY, seed=5).double()
        x, attn = (t.double() for t in _tube(1))
    _randomize_biases(d, 1)
    attn.requires_grad_(True)
    f = lambda: torch.log(d(x, attn)).sum()
    params = list(d.parameters())
    grads = torch.autograd.grad(f(), params + [attn])
    rng = np.random.default_rng(1)
    h = 1e-6
    targets = list(zip(params, grads[:-1])) + [(attn, grads[-1])]
    with torch.no_grad():
        for _ in range(30):
            t, g = targets[int(rng.integers(len(targets)))]
            flat = t.view(-1)
            j = int(rng.integers(flat.numel()))
            old = flat[j].item()
            flat[j] = old + h
            up = f().item()
            flat[j] = old - h
            down = f().item()
            flat[j] = old
            num, ana = (up - down) / (2 * h), g.reshape(-1)[j].item()
            assert abs(num - ana) / max(abs(num), abs(ana), 1e-6) < 1e-4


def test_faithful_forward_shapes_meta():
    cfg = DiscriminatorConfig()
    with torch.device("meta"):
        da, dm = AppearanceDiscriminator(cfg), MotionDiscriminator(cfg)
        assert da(torch.empty(2, 3, 300, 300), torch.empty(2, 300, 300)).shape == (2,)
        assert dm(torch.empty(1, 3, 3, 300, 300), torch.empty(1, 3, 300, 300)).shape == (1,)
    assert da.fc1.in_features == 57600 and dm.fc1.in_features == 900
