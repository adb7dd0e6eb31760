import numpy as np
import pytest

from gradcheck import input_grad_rel_errors, param_grad_rel_errors
from txai_bench.nn import Conv2D, Dense, Flatten, MaxPool, ReLU, Softmax, build_network


ARCHES = [
    ([Conv2D(4, 3, 3, 1, 1), ReLU(), MaxPool(2, 2), Flatten(), Dense(3), Softmax()],
     (1, 12, 12), 3),
    ([Conv2D(3, 3, 3), ReLU(), Conv2D(4, 3, 3, 2, 0), ReLU(), Flatten(), Dense(4), Softmax()],
     (2, 10, 10), 4),
    ([Flatten(), Dense(16), ReLU(), Dense(4), Softmax()], (1, 8, 8), 4),
]


@pytest.mark.parametrize("specs,shape,classes", ARCHES)
def test_param_gradients_match_finite_differences(specs, shape, classes):
    net = build_network(specs, shape, classes, seed=11)
    assert net.n_parameters <= 5000
    rng = np.random.default_rng(12)
    x = rng.random((2, *shape))
    y = rng.integers(0, classes, 2)
    errs = param_grad_rel_errors(net, x, y, samples_per_tensor=30, seed=13)
    assert errs.max() < 1e-3
    assert np.median(errs) < 1e-6


@pytest.mark.parametrize("specs,shape,classes", ARCHES)
@pytest.mark.parametrize("mode", ["standard"])
def test_input_gradients_match_finite_differences(specs, shape, classes, mode):
    net = build_network(specs, shape, classes, seed=21)
    rng = np.random.default_rng(22)
    x = rng.random((2, *shape))
    errs = input_grad_rel_errors(net, x, class_index=1, samples=40, seed=23, relu_mode=mode)
    assert errs.max() < 1e-3
    assert np.median(errs) < 1e-6


def test_conv_input_gradient_example():
    # the pinned example: 2-layer conv net, any pixel within rel 1e-4 of FD
    specs = [Conv2D(3, 3, 3, 1, 1), ReLU(), Conv2D(2, 3, 3, 1, 1), ReLU(),
             Flatten(), Dense(2), Softmax()]
    net = build_network(specs, (1, 8, 8), 2, seed=31)
    rng = np.random.default_rng(32)
    x = rng.random((1, 1, 8, 8))
    errs = input_grad_rel_errors(net, x, class_index=0, samples=50, seed=33)
    assert errs.max() < 1e-4
