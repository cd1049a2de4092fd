import numpy as np
import pytest
import torch
from hypothesis import settings

from tanet.synthetic import SyntheticSceneConfig, make_synthetic_sequence

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def square_seq():
    return make_synthetic_sequence(SyntheticSceneConfig(num_frames=12, seed=3))


@pytest.fixture(scope="session")
def occluded_seq():
    return make_synthetic_sequence(SyntheticSceneConfig(
        num_frames=30, target_shape="textured-patch", motion="sinusoidal", speed=3.0,
        occlusion_windows=((10, 21),), seed=5))
