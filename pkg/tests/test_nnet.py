import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lprvqa.nnet import (
    Dense,
    DenseNet,
    NonFiniteGradientError,
    OptimizerState,
    ema_update,
    load_net,
    save_net,
    sgd_step,
)

from conftest import assert_grads_close, numeric_grads


def scalar_net(w1, w2, act1="relu", act2="sigmoid"):
    return DenseNet([
        Dense(np.array([[w1]]), np.zeros(1), act1),
        Dense(np.array([[w2]]), np.zeros(1), act2),
    ])


def test_zero_net_outputs_half():
    net = DenseNet([
        Dense(np.zeros((4, 3)), np.zeros(4), "relu"),
        Dense(np.zeros((2, 4)), np.zeros(2), "sigmoid"),
    ])
    np.testing.assert_array_equal(net(np.ones(3)), [0.5, 0.5])


def test_two_layer_hand_evaluation():
    out = scalar_net(2.0, 1.0)(np.array([1.0]))
    assert out[0] == pytest.approx(1 / (1 + math.exp(-2.0)), abs=1e-15)
    assert out[0] == pytest.approx(0.880797, abs=1e-6)


def test_relu_negative_branch():
    net = scalar_net(1.0, 1.0, act2="identity")
    _, cache = net.forward(np.array([-3.0]))
    assert cache.outputs[0][0, 0] == 0.0


def test_forward_rejects_bad_input():
    net = scalar_net(1.0, 1.0)
    with pytest.raises(ValueError):
        net(np.ones(2))
    with pytest.raises(ValueError):
        net(np.array([np.nan]))


def test_layers_must_chain():
    with pytest.raises(ValueError):
        DenseNet([Dense(np.zeros((2, 3)), np.zeros(2)), Dense(np.zeros((1, 4)), np.zeros(1))])


def test_sigmoid_derivative_at_zero():
    net = DenseNet([Dense(np.zeros((1, 1)), np.zeros(1), "sigmoid")])
    _, cache = net.forward(np.array([1.0]))
    grads, _ = net.backward(cache, np.array([1.0]))
    assert grads[1][0] == 0.25


def test_zero_output_gradient_gives_zero_grads():
    net = DenseNet.init([3, 5, 2], ["relu", "sigmoid"], np.random.default_rng(0))
    _, cache = net.forward(np.ones(3))
    grads, gin = net.backward(cache, np.zeros(2))
    assert all(not g.any() for g in grads)
    assert not gin.any()


def test_backward_rejects_foreign_cache():
    a = DenseNet.init([2, 2], ["identity"], np.random.default_rng(0))
    b = DenseNet.init([2, 2], ["identity"], np.random.default_rng(1))
    _, cache = a.forward(np.ones(2))
    with pytest.raises(ValueError):
        b.backward(cache, np.ones(2))


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    sizes=st.lists(st.integers(1, 16), min_size=2, max_size=4),
    batch=st.integers(1, 4),
)
def test_gradients_match_finite_differences(seed, sizes, batch):
    rng = np.random.default_rng(seed)
    acts = list(rng.choice(["relu", "sigmoid", "identity"], size=len(sizes) - 1))
    net = DenseNet.init(sizes, acts, rng)
    for layer in net.layers:
        layer.bias[:] = rng.normal(size=layer.bias.shape)
    x = rng.normal(size=(batch, sizes[0]))
    weights = rng.normal(size=(batch, sizes[-1]))

    def loss():
        return float(np.sum(weights * net(x)))

    _, cache = net.forward(x)
    grads, _ = net.backward(cache, weights)
    assert_grads_close(grads, numeric_grads(loss, net.params()))


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = DenseNet.init([4, 6, 3], ["sigmoid", "identity"], rng)
    x = rng.normal(size=4)
    w = rng.normal(size=3)
    _, cache = net.forward(x)
    _, gin = net.backward(cache, w)
    num = numeric_grads(lambda: float(w @ net(x)), [x])[0]
    np.testing.assert_allclose(gin, num, rtol=1e-4, atol=1e-7)


def test_sgd_plain_step():
    p = [np.array([1.0])]
    sgd_step(p, [np.array([1.0])], OptimizerState(0.1, 0.0, 0.0))
    assert p[0][0] == pytest.approx(0.9, abs=1e-15)


def test_learning_rate_schedule():
    s = OptimizerState(0.1, 0.01, 0.9)
    assert s.learning_rate(100) == pytest.approx(0.05, abs=1e-15)
    rates = [s.learning_rate(n) for n in range(50)]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    flat = OptimizerState(0.1, 0.0, 0.9)
    assert len({flat.learning_rate(n) for n in range(50)}) == 1


def test_sgd_momentum_unroll():
    p = [np.array([0.0])]
    state = OptimizerState(0.1, 0.0, 0.9)
    sgd_step(p, [np.array([1.0])], state)
    assert p[0][0] == pytest.approx(-0.1, abs=1e-15)
    sgd_step(p, [np.array([1.0])], state)
    assert p[0][0] == pytest.approx(-0.29, abs=1e-15)
    assert state.iteration == 2


def test_sgd_rejects_non_finite_gradient():
    p = [np.array([1.0])]
    with pytest.raises(NonFiniteGradientError):
        sgd_step(p, [np.array([np.inf])], OptimizerState())
    assert p[0][0] == 1.0


def test_optimizer_validation():
    with pytest.raises(ValueError):
        OptimizerState(momentum=1.0)
    with pytest.raises(ValueError):
        OptimizerState(learning_rate0=0.0)


def test_sgd_is_deterministic():
    def run():
        rng = np.random.default_rng(3)
        net = DenseNet.init([3, 4, 1], ["relu", "sigmoid"], rng)
        state = OptimizerState()
        x = rng.normal(size=(5, 3))
        for _ in range(20):
            _, cache = net.forward(x)
            grads, _ = net.backward(cache, np.ones((5, 1)))
            sgd_step(net.params(), grads, state)
        return net.params()

    for a, b in zip(run(), run()):
        assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize(
    "alpha, expected",
    [(0.5, 0.5), (0.0, 0.0), (1.0, 1.0)],
)
def test_ema_update(alpha, expected):
    t = [np.array([1.0])]
    ema_update(t, [np.array([0.0])], alpha)
    assert t[0][0] == expected


def test_ema_converges_geometrically():
    t = [np.array([1.0])]
    s = [np.array([0.0])]
    for n in range(1, 11):
        ema_update(t, s, 0.5)
        assert t[0][0] == pytest.approx(0.5**n, rel=1e-15)


def test_ema_shape_mismatch():
    with pytest.raises(ValueError):
        ema_update([np.zeros(2)], [np.zeros(3)], 0.5)


def test_checkpoint_round_trip(tmp_path):
    net = DenseNet.init([3, 7, 1], ["relu", "sigmoid"], np.random.default_rng(9))
    save_net(net, tmp_path / "net.npz")
    back = load_net(tmp_path / "net.npz")
    assert [l.activation for l in back.layers] == ["relu", "sigmoid"]
    for a, b in zip(net.params(), back.params()):
        assert a.tobytes() == b.tobytes()
