import numpy as np
import pytest
import torch

from tanet.errors import ShapeError
from tanet.generator import (AttentionDecoder, AttentionGenerator, GeneratorAttention, GeneratorConfig,
                             fuse_features, to_clip_tensor)
from tanet.layers import halvings, zero_parameters

CFG = GeneratorConfig.tiny()


@pytest.fixture(scope="module")
def gen():
    return AttentionGenerator(CFG, seed=0).eval()


def _inputs(n=2, seed=0, cfg=CFG):
    g = torch.Generator().manual_seed(seed)
    clip = torch.rand(n, 3, cfg.L, cfg.R, cfg.R, generator=g)
    tmpl = torch.rand(n, 3, cfg.template_size, cfg.template_size, generator=g)
    return clip, tmpl


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig.tiny(L=0)
    with pytest.raises(ValueError):
        GeneratorConfig.tiny(decoder_channels=(8,))
    with pytest.raises(ValueError):
        GeneratorConfig(scale="huge")
    with pytest.raises(ValueError):
        GeneratorConfig.tiny(output_activation="softmax")
    assert GeneratorConfig.from_dict(CFG.to_dict()) == CFG


def test_halvings_ladder():
    assert halvings(300, 5) == [300, 150, 75, 38, 19, 10]
    assert halvings(64, 2) == [64, 32, 16]


def test_tiny_stage_shapes(gen):
    clip, tmpl = _inputs()
    # two stride-2 stages: 64 -> 32 -> 16
    assert gen.encode_motion(clip).shape == (2, 16, 16, 16)
    assert gen.encode_appearance(clip[:, :, 0]).shape == (2, 16, 16, 16)
    assert gen.encode_template(tmpl).shape == (2, 16, 16, 16)
    assert CFG.feature_size == 16 and CFG.fused_channels == 48


def test_decoder_stage_sizes():
    dec = AttentionDecoder(CFG)
    assert dec.sizes == [32, 64]
    x = torch.rand(1, 48, 16, 16)
    sizes = []
    for size, group in zip(dec.sizes, dec.groups):
        x = group(torch.nn.functional.interpolate(x, size=(size, size)))
        sizes.append(tuple(x.shape[-2:]))
    assert sizes == [(32, 32), (64, 64)]


def test_faithful_shapes_on_meta_device():
    cfg = GeneratorConfig.faithful()
    with torch.device("meta"):
        g = AttentionGenerator(cfg, seed=0)
        clip = torch.empty(1, 3, 3, 300, 300)
        tmpl = torch.empty(1, 3, 128, 128)
        assert g.encode_appearance(clip[:, :, 1]).shape == (1, 512, 10, 10)
        assert g.encode_motion(clip).shape == (1, 512, 10, 10)
        assert g.encode_template(tmpl).shape == (1, 512, 10, 10)
        assert g(clip, tmpl).shape == (1, 3, 300, 300)
    assert g.decoder.sizes == [19, 38, 75, 150, 300]


def test_zero_input_zero_bias_gives_zero_features(gen):
    clip = torch.zeros(1, 3, 3, 64, 64)
    assert torch.count_nonzero(gen.encode_motion(clip)) == 0
    assert torch.count_nonzero(gen.encode_appearance(clip[:, :, 0])) == 0


def test_determinism(gen):
    clip, tmpl = _inputs()
    a = gen(clip, tmpl)
    b = AttentionGenerator(CFG, seed=0).eval()(clip, tmpl)
    assert torch.equal(a, b)
    assert not torch.equal(a, AttentionGenerator(CFG, seed=1)(clip, tmpl))


def test_template_tiling_and_pool(gen):
    _, tmpl = _inputs()
    f = gen.encode_template(tmpl)
    assert torch.equal(f, f[:, :, :1, :1].expand_as(f))
    vol = gen.template.volume(tmpl)
    assert torch.allclose(f[:, :, 0, 0], vol.mean(dim=(2, 3)))
    assert torch.equal(gen.encode_template(tmpl.clone()), f)


def test_fuse_order_and_slices():
    m, a, t = torch.rand(1, 4, 5, 5), torch.rand(1, 6, 5, 5), torch.rand(1, 2, 5, 5)
    e = fuse_features(m, a, t)
    assert e.shape[1] == 12
    assert torch.equal(e[:, :4], m) and torch.equal(e[:, 4:10], a) and torch.equal(e[:, 10:], t)
    with pytest.raises(ShapeError):
        fuse_features(m, torch.rand(1, 6, 4, 5), t)


def test_fuse_order_is_part_of_the_contract(gen):
    clip, tmpl = _inputs(1)
    f_m, f_a, f_t = gen.encode_motion(clip), gen.encode_appearance(clip[:, :, 1]), gen.encode_template(tmpl)
    right = gen.decode_attention(fuse_features(f_m, f_a, f_t))
    swapped = gen.decode_attention(fuse_features(f_a, f_m, f_t))
    assert torch.equal(right, gen.predict_attention(clip, tmpl, mode="track"))
    assert not torch.allclose(right, swapped)


def test_decoder_range_and_zero_weights(gen):
    x = torch.randn(3, 48, 16, 16) * 100
    y = gen.decode_attention(x)
    assert y.shape == (3, 1, 64, 64) and y.min() >= 0 and y.max() <= 1
    dec = AttentionDecoder(CFG)
    zero_parameters(dec)
    assert torch.equal(dec(torch.rand(1, 48, 16, 16)), torch.full((1, 1, 64, 64), 0.5))
    with pytest.raises(ShapeError):
        dec(torch.rand(1, 47, 16, 16))


def test_predict_modes(gen):
    clip, tmpl = _inputs()
    assert gen.predict_attention(clip, tmpl, "train").shape == (2, 3, 64, 64)
    assert gen.predict_attention(clip, tmpl, "track").shape == (2, 1, 64, 64)
    with pytest.raises(ValueError):
        gen.predict_attention(clip, tmpl, "eval")


def test_compositional_oracle(gen):
    clip, tmpl = _inputs()
    maps = gen(clip, tmpl)
    f_m, f_t = gen.encode_motion(clip), gen.encode_template(tmpl)
    for i in range(3):
        ref = gen.decode_attention(fuse_features(f_m, gen.encode_appearance(clip[:, :, i]), f_t))[:, 0]
        assert torch.allclose(maps[:, i], ref, atol=1e-6)


def test_shared_decoder_identical_frames(gen):
    clip, tmpl = _inputs()
    clip = clip[:, :, :1].expand(-1, -1, 3, -1, -1).contiguous()
    maps = gen(clip, tmpl)
    assert torch.equal(maps[:, 0], maps[:, 1]) and torch.equal(maps[:, 1], maps[:, 2])


def test_extreme_inputs_stay_in_range(gen):
    clip, tmpl = _inputs()
    for scale in (1e6, -1e6):
        y = gen(clip * scale, tmpl * scale)
        assert torch.isfinite(y).all() and y.min() >= 0 and y.max() <= 1


def test_shape_errors(gen):
    clip, tmpl = _inputs()
    with pytest.raises(ShapeError, match="expected"):
        gen(clip[:, :, :2], tmpl)
    with pytest.raises(ShapeError):
        gen(clip, tmpl[:, :, :16])
    with pytest.raises(ShapeError):
        gen(clip, tmpl[:1])
    with pytest.raises(ShapeError):
        gen.encode_appearance(clip[:, :, 0, :32])


def test_numpy_wrapper(gen, square_seq):
    from tanet.data import crop_template, make_clip

    wrap = GeneratorAttention(gen)
    clip = make_clip(square_seq, 4, 3, 64)
    tmpl = crop_template(square_seq.frames[0], square_seq.annotations[0], 32)
    out = wrap(clip, tmpl)
    assert out.shape == (64, 64)
    ref = gen.predict_attention(to_clip_tensor([clip]), torch.from_numpy(tmpl).permute(2, 0, 1)[None], "track")
    assert np.array_equal(out, ref[0, 0].detach().numpy())


def test_generator_gradcheck_double():
    cfg = GeneratorConfig.tiny(R=32, template_size=16, motion_channels=(2, 3), appearance_channels=(2, 3),
                               template_channels=(2, 3), decoder_channels=(4, 2))
    g = AttentionGenerator(cfg, seed=3).double()
    # zero biases put ReLU inputs exactly on the kink; move to a generic point
    with torch.no_grad():
        for name, p in g.named_parameters():
            if name.endswith("bias"):
                p.uniform_(-0.1, 0.1, generator=torch.Generator().manual_seed(len(name)))
    clip, tmpl = (t.double() for t in _inputs(1, cfg=cfg))
    target = (torch.rand(1, 3, 32, 32, generator=torch.Generator().manual_seed(1)) > 0.5).double()
    loss = lambda: torch.nn.functional.binary_cross_entropy(g(clip, tmpl), target)
    params = list(g.parameters())
    grads = torch.autograd.grad(loss(), params)
    rng = np.random.default_rng(0)
    h = 1e-6
    with torch.no_grad():
        for _ in range(40):
            i = int(rng.integers(len(params)))
            flat = params[i].view(-1)
            j = int(rng.integers(flat.numel()))
            old = flat[j].item()
            flat[j] = old + h
            up = loss().item()
            flat[j] = old - h
            down = loss().item()
            flat[j] = old
            num, ana = (up - down) / (2 * h), grads[i].view(-1)[j].item()
            assert abs(num - ana) / max(abs(num), abs(ana), 1e-6) < 1e-4
