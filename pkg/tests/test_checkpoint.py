import pytest
import torch

from tanet.checkpoint import load_checkpoint, load_generator, read_checkpoint, save_checkpoint
from tanet.discriminators import AppearanceDiscriminator, DiscriminatorConfig, MotionDiscriminator
from tanet.errors import CheckpointError
from tanet.generator import AttentionGenerator, GeneratorConfig
from tanet.layers import parameter_digest


@pytest.fixture
def nets():
    g = AttentionGenerator(GeneratorConfig.tiny(), seed=1)
    # perturb so the saved weights differ from a fresh init
    with torch.no_grad():
        for p in g.parameters():
            p.add_(0.01)
    return g, AppearanceDiscriminator(DiscriminatorConfig.tiny(), seed=2), MotionDiscriminator(DiscriminatorConfig.tiny(), seed=3)


def test_round_trip_bitwise(nets, tmp_path):
    g, da, dm = nets
    path = save_checkpoint(tmp_path / "c.pt", g, da, dm, training={"iteration": 4}, run_config={"seed": 0})
    g2, da2, dm2, payload = load_checkpoint(path)
    assert payload["training"] == {"iteration": 4} and payload["run_config"] == {"seed": 0}
    for a, b in ((g, g2), (da, da2), (dm, dm2)):
        assert parameter_digest(a) == parameter_digest(b)
    torch.manual_seed(0)
    clip, tmpl = torch.rand(2, 3, 3, 64, 64), torch.rand(2, 3, 32, 32)
    with torch.no_grad():
        assert torch.equal(g.eval()(clip, tmpl), g2.eval()(clip, tmpl))
        assert torch.equal(da(clip[:, :, 0], clip[:, 0, 0]), da2(clip[:, :, 0], clip[:, 0, 0]))
        assert torch.equal(dm(clip, clip[:, 0]), dm2(clip, clip[:, 0]))


def test_generator_only(nets, tmp_path):
    g = nets[0]
    path = save_checkpoint(tmp_path / "g.pt", g)
    _, da, dm, _ = load_checkpoint(path)
    assert da is None and dm is None
    assert parameter_digest(load_generator(path, GeneratorConfig.tiny())) == parameter_digest(g)


def test_config_mismatch(nets, tmp_path):
    path = save_checkpoint(tmp_path / "g.pt", nets[0])
    with pytest.raises(CheckpointError, match="config mismatch"):
        load_generator(path, GeneratorConfig.tiny(R=96))


def test_foreign_and_versioned_files(nets, tmp_path):
    torch.save({"weights": 1}, tmp_path / "foreign.pt")
    with pytest.raises(CheckpointError, match="not a tanet-checkpoint"):
        read_checkpoint(tmp_path / "foreign.pt")
    (tmp_path / "junk.pt").write_bytes(b"not a pickle")
    with pytest.raises(CheckpointError, match="not a readable"):
        read_checkpoint(tmp_path / "junk.pt")
    path = save_checkpoint(tmp_path / "g.pt", nets[0])
    payload = torch.load(path, weights_only=False)
    payload["version"] = 99
    torch.save(payload, path)
    with pytest.raises(CheckpointError, match="unsupported checkpoint version 99"):
        read_checkpoint(path)
    with pytest.raises(FileNotFoundError):
        read_checkpoint(tmp_path / "missing.pt")
