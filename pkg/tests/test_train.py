import numpy as np
import pytest

from txai_bench.nn import (
    Dense,
    Flatten,
    Softmax,
    TrainConfig,
    TrainingDiverged,
    build_network,
    train,
)


@pytest.fixture
def separable():
    rng = np.random.default_rng(5)
    x = np.zeros((80, 1, 1, 2))
    y = rng.integers(0, 2, 80)
    x[y == 0, 0, 0, 0] = rng.uniform(0.6, 1.0, int((y == 0).sum()))
    x[y == 1, 0, 0, 1] = rng.uniform(0.6, 1.0, int((y == 1).sum()))
    return x, y


def test_linearly_separable_reaches_full_accuracy(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    trained, history = train(net, x, y, TrainConfig(learning_rate=0.5, epochs=50, batch_size=8, seed=0))
    assert history[-1].accuracy == 1.0


def test_zero_epochs_is_identity(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    trained, history = train(net, x, y, TrainConfig(epochs=0, seed=0))
    assert history == []
    for p, q in zip(net.params, trained.params):
        if p is None:
            continue
        for k in p:
            np.testing.assert_array_equal(p[k], q[k])


def test_training_is_deterministic(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    cfg = TrainConfig(learning_rate=0.2, epochs=5, batch_size=8, seed=42)
    a, hist_a = train(net, x, y, cfg)
    b, hist_b = train(net, x, y, cfg)
    assert hist_a == hist_b  # bitwise: EpochStats are plain floats
    for p, q in zip(a.params, b.params):
        if p is None:
            continue
        for k in p:
            np.testing.assert_array_equal(p[k], q[k])


def test_input_net_not_mutated(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    before = net.parameter_checksum()
    train(net, x, y, TrainConfig(learning_rate=0.5, epochs=3, seed=0))
    assert net.parameter_checksum() == before


def test_divergence_names_epoch_and_batch(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    with pytest.raises(TrainingDiverged, match=r"epoch \d+, batch \d+"):
        train(net, x * 1e150, y, TrainConfig(learning_rate=1e250, epochs=3, seed=0))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)


def test_label_out_of_range_rejected(separable):
    x, y = separable
    net = build_network([Flatten(), Dense(2), Softmax()], (1, 1, 2), 2, seed=0)
    with pytest.raises(ValueError, match="label out of range"):
        train(net, x, y + 5, TrainConfig(epochs=1))
