"""Pixel-wise and adversarial loss terms."""

from __future__ import annotations

import torch

from .errors import ShapeError

EPS = 1e-7


def bce_loss(pred: torch.Tensor, target: torch.Tensor, eps: float = EPS, one_sided: bool = False) -> torch.Tensor:
    """Mean binary cross-entropy over pixels.

    ``one_sided`` keeps only the ``-y log p`` term (the ablation variant, which
    is minimised by predicting 1 everywhere).
    """
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    p = pred.clamp(eps, 1.0 - eps)
    y = target.to(p.dtype)
    loss = -y * torch.log(p)
    if not one_sided:
        loss = loss - (1.0 - y) * torch.log1p(-p)
    return loss.mean()


def discriminator_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """``-(E[log D(real)] + E[log(1 - D(fake))])``, minimised by the discriminator."""
    return -(torch.log(real_scores).mean() + torch.log1p(-fake_scores).mean())


def generator_adversarial_term(fake_scores: torch.Tensor, form: str = "saturating") -> torch.Tensor:
    """Term added (times its weight) to the generator objective.

    ``saturating`` is ``E[log(1 - D(fake))]`` exactly as in the min-max
    objective; ``non-saturating`` swaps in ``-E[log D(fake)]``.
    """
    if form == "saturating":
        return torch.log1p(-fake_scores).mean()
    if form == "non-saturating":
        return -torch.log(fake_scores).mean()
    raise ValueError(f"unknown adversarial form {form!r}")
