import numpy as np
import pytest

from txai_bench.nn import (
    Conv2D,
    Dense,
    Flatten,
    MaxPool,
    ReLU,
    Softmax,
    build_network,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def conv_net():
    """Small conv stack on 1x12x12 input, 3 classes, random init."""
    specs = [
        Conv2D(4, 3, 3, stride=1, zero_padding=1), ReLU(), MaxPool(2, 2),
        Conv2D(6, 3, 3), ReLU(), Flatten(), Dense(3), Softmax(),
    ]
    return build_network(specs, (1, 12, 12), 3, seed=1)


@pytest.fixture
def dense_net():
    """ReLU-free single dense layer on a flat 1x2x2 input."""
    return build_network([Flatten(), Dense(3)], (1, 2, 2), 3, seed=2)
