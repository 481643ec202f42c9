"""Shared fixtures: tiny models and datasets that train in well under a second."""

import numpy as np
import pytest

from latentwalk import (Dataset, GenerativeAutoencoder, Rng, TrainConfig,
                        gen_gaussian_mixture)


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def tiny_vae():
    return GenerativeAutoencoder("vae", data_dim=2, latent_dim=2,
                                 hidden_dims=(8, 8), init_seed=0)


@pytest.fixture
def tiny_aae():
    return GenerativeAutoencoder("aae", data_dim=2, latent_dim=2,
                                 hidden_dims=(8, 8), adversary_dims=(8,),
                                 init_seed=0)


@pytest.fixture
def tiny_dataset():
    return gen_gaussian_mixture(96, seed=0)


@pytest.fixture
def fast_config():
    return TrainConfig(epochs=2, batch_size=32, seed=0)


@pytest.fixture
def box_samples():
    """A small batch strictly inside (0, 1), usable as reconstruction targets."""
    vals = Rng(77).uniform((16, 2)) * 0.9 + 0.05
    return np.asarray(vals)
