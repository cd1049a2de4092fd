import math

import pytest
import torch

from tanet.errors import ShapeError
from tanet.losses import bce_loss, discriminator_loss, generator_adversarial_term


def test_bce_perfect_prediction():
    y = (torch.rand(4, 8, 8) > 0.5).float()
    assert bce_loss(y, y).item() < 1e-6


def test_bce_half():
    y = (torch.rand(4, 8, 8) > 0.5).float()
    assert bce_loss(torch.full_like(y, 0.5), y).item() == pytest.approx(math.log(2))


def test_bce_hand_sum():
    g = torch.Generator().manual_seed(0)
    p = torch.rand(4, 4, generator=g, dtype=torch.float64) * 0.98 + 0.01
    y = (torch.rand(4, 4, generator=g) > 0.5).double()
    ref = 0.0
    for i in range(4):
        for j in range(4):
            yy, pp = y[i, j].item(), p[i, j].item()
            ref -= yy * math.log(pp) + (1 - yy) * math.log(1 - pp)
    assert bce_loss(p, y).item() == pytest.approx(ref / 16, rel=1e-12)


def test_bce_one_sided():
    y = torch.tensor([[1.0, 0.0]])
    p = torch.tensor([[0.8, 0.3]])
    assert bce_loss(p, y, one_sided=True).item() == pytest.approx(-math.log(0.8) / 2)
    assert bce_loss(torch.ones(1, 2), y, one_sided=True).item() < 1e-6  # degenerate optimum


def test_bce_shape_error():
    with pytest.raises(ShapeError):
        bce_loss(torch.rand(2, 4), torch.rand(2, 5))


def test_bce_non_negative_and_clamped():
    p = torch.tensor([0.0, 1.0, 0.5])
    y = torch.tensor([1.0, 0.0, 1.0])
    v = bce_loss(p, y)
    assert torch.isfinite(v) and v >= 0


def test_discriminator_loss_examples():
    half = torch.full((5,), 0.5)
    assert discriminator_loss(half, half).item() == pytest.approx(2 * math.log(2))
    good = discriminator_loss(torch.full((5,), 1 - 1e-7), torch.full((5,), 1e-7)).item()
    assert 0 <= good < 1e-6


def test_single_sample_terms():
    r, f = torch.tensor([0.7]), torch.tensor([0.2])
    assert discriminator_loss(r, f).item() == pytest.approx(-(math.log(0.7) + math.log(0.8)))
    assert generator_adversarial_term(f).item() == pytest.approx(math.log(0.8))
    assert generator_adversarial_term(f, "non-saturating").item() == pytest.approx(-math.log(0.2))
    with pytest.raises(ValueError):
        generator_adversarial_term(f, "wasserstein")
