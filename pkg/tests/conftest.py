import numpy as np
import pytest

from data.ShapesWorld import ShapesWorldSpec, generate_world
from data.dataset_files import WorldDataset
from training.config import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec():
    return ShapesWorldSpec(num_classes=3, height=16, width=16, max_shapes=2, seed=7)


@pytest.fixture
def tiny_dataset(tiny_spec):
    samples = generate_world(tiny_spec, 8, n_jobs=1)
    test_samples = generate_world(tiny_spec, 4, start=8, n_jobs=1)
    return WorldDataset(
        tiny_spec,
        np.stack([s.label_map for s in samples]),
        np.stack([s.image for s in samples]),
        np.stack([s.label_map for s in test_samples]),
        np.stack([s.image for s in test_samples]),
    )


@pytest.fixture
def tiny_config():
    return TrainConfig(
        z_dim=2,
        batch=2,
        steps=2,
        generator_channels=[8, 8],
        spade_hidden=4,
        discriminator_channels=[8, 8],
        unet_channels=[4, 8],
        seed=3,
        log_every=1,
    )
