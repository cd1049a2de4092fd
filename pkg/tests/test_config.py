import math

import pytest

from tanet.config import RunConfig


def test_defaults_validate_and_sections():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.generator_config().R == 64
    assert cfg.discriminator_config().input_size == 64
    assert cfg.tracker_config().beta2 == 5
    assert cfg.training_config().lr_g == 3e-3


def test_parse_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nbeta2 = inf\nlocal_only = yes\nseed = 4  # trailing\noccolusion_typo = 1\n")
    with pytest.raises(ValueError, match="run.cfg:5: unknown config key"):
        RunConfig.resolve(path)
    path.write_text("beta2 = inf\nlocal_only = yes\nseed = 4\nocclusion = 3-6;9-12\n")
    cfg = RunConfig.resolve(path, {"seed": "7", "lambda1": None})
    assert cfg.beta2 == math.inf and cfg.local_only and cfg.seed == 7
    assert cfg.occlusion_windows() == ((3, 6), (9, 12))
    with pytest.raises(ValueError, match="expected a boolean"):
        RunConfig.coerce("local_only", "maybe")


def test_echo_reproduces(tmp_path):
    cfg = RunConfig(seed=9, beta1=0.7, local_only=True, occlusion="2-5")
    echoed = cfg.echo(tmp_path)
    assert RunConfig.resolve(echoed) == cfg


@pytest.mark.parametrize("kw", [dict(scale="huge"), dict(workers=0), dict(beta1=2.0), dict(occlusion="3"),
                                dict(resolution=32), dict(lambda1=-1.0)])
def test_invalid_values(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw).validate()
