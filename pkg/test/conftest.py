import os
import sys

import numpy as np
import pytest

# Add parent directory to path so we can import the project packages
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dnn.training import TrainConfig, train_dnn
from netcore.network import LayerKind, LayerSpec, NetworkSpec, build_mlp
from utils.data_loader import make_blobs, train_test_split


def dense(weight, mu=None):
    return LayerSpec(LayerKind.DENSE, weight=np.asarray(weight, dtype=float), mu=mu)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def single_neuron_net():
    """x -> one thresholded neuron (weight 1) -> identity readout."""
    return NetworkSpec((1,), [dense([[1.0]], mu=1.0), dense([[1.0]])])


@pytest.fixture
def blobs():
    return make_blobs(600, 4, spread=0.3, seed=3)


@pytest.fixture(scope="session")
def trained_mlp():
    """Small 2 -> 32 -> 32 -> 4 MLP trained on blobs; shared by the slower tests."""
    data = make_blobs(800, 4, spread=0.3, seed=11)
    train, test = train_test_split(data, 0.25, seed=11)
    net = build_mlp(2, [32, 32], 4, np.random.default_rng(11))
    cfg = TrainConfig(epochs=30, learning_rate=0.05, momentum=0.5, batch_size=32, seed=11)
    return train_dnn(net, train, cfg), train, test
