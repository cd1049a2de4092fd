"""Properties of discriminators after a short adversarial run on moving squares."""

import itertools

import pytest
import torch

from tanet.discriminators import DiscriminatorConfig
from tanet.generator import GeneratorConfig
from tanet.synthetic import SyntheticSceneConfig, synthetic_suite
from tanet.training import ClipDataset, Trainer, TrainingConfig, build_networks


@pytest.fixture(scope="module")
def trained():
    base = SyntheticSceneConfig(num_frames=20)
    ds = ClipDataset(synthetic_suite(base, range(10)), R=64, L=3, template_size=32)
    held = ClipDataset(synthetic_suite(base, range(100, 104)), R=64, L=3, template_size=32)
    cfg = TrainingConfig(max_iters=1000, batch_size=4, lr_g=3e-3, lr_da=1e-2, lr_dm=1e-2, seed=0)
    tr = Trainer(ds, cfg, *build_networks(GeneratorConfig.tiny(), DiscriminatorConfig.tiny(), 0))
    tr.run()
    batch = held.batch(range(len(held)))
    with torch.no_grad():
        fake = tr.generator(batch["clip"], batch["template"])
    return tr, batch, fake


PERMS = [list(p) for p in itertools.permutations(range(3)) if list(p) != [0, 1, 2]]


@pytest.mark.slow
def test_real_pairs_outscore_generated(trained):
    tr, b, fake = trained
    with torch.no_grad():
        real = tr.app_disc(b["clip"][:, :, 1], b["masks"][:, 1])
        gen = tr.app_disc(b["clip"][:, :, 1], fake[:, 1])
    assert real.mean() > gen.mean()


@pytest.mark.slow
def test_shuffled_map_sequences_score_lower(trained):
    tr, b, _ = trained
    with torch.no_grad():
        ordered = tr.mot_disc(b["clip"], b["masks"]).mean()
        shuffled = torch.stack([tr.mot_disc(b["clip"], b["masks"][:, p]).mean() for p in PERMS])
    assert ordered > shuffled.mean()


@pytest.mark.slow
def test_motion_score_depends_on_temporal_order(trained):
    tr, b, _ = trained
    with torch.no_grad():
        ordered = tr.mot_disc(b["clip"], b["masks"])
        for p in PERMS:
            permuted = tr.mot_disc(b["clip"][:, :, p], b["masks"][:, p])
            assert (ordered - permuted).abs().max() > 1e-3
