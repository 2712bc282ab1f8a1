#!/usr/bin/env python3
"""
Autograd Engine Tests
Tensor graph, differentiable operations, layers, Adam and finite-difference checks
"""

import logging
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from autograd import (
    Adam, BatchNorm1d, Conv1d, ConvTranspose1d, Dense, Tensor, adam_step, AdamState,
    backward, gradcheck, is_grad_enabled, no_grad
)
from autograd import functional as F
from autograd.tensor import ComputeGraph
from core.exceptions import CheckpointError, ShapeError, StatisticsError
from core.precision import default_dtype, float64_mode
from model import RaveModel

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def t64(values, requires_grad: bool = False) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=requires_grad, dtype=np.float64)


def test_conv1d_examples():
    x = t64([[[1.0, 2.0, 3.0]]])
    out = F.conv1d(x, t64([[[1.0, 1.0]]]))
    np.testing.assert_allclose(out.data, [[[3.0, 5.0]]])

    identity = F.conv1d(x, t64([[[1.0]]]))
    np.testing.assert_allclose(identity.data, x.data)

    assert F.conv_output_length(16, 3, stride=4, padding=1) == 4
    long = t64(np.zeros((1, 1, 16)))
    assert F.conv1d(long, t64(np.ones((1, 1, 3))), stride=4, padding=1).shape == (1, 1, 4)

    with pytest.raises(ShapeError):
        F.conv1d(x, t64(np.ones((1, 2, 2))))
    logger.info("✅ conv1d hand examples")


def test_conv_transpose_examples_and_adjoint():
    out = F.conv_transpose1d(t64([[[1.0, 0.0]]]), t64([[[1.0, 1.0]]]), stride=2)
    np.testing.assert_allclose(out.data, [[[1.0, 1.0, 0.0, 0.0]]])

    x = t64(np.random.default_rng(0).standard_normal((1, 1, 5)))
    np.testing.assert_allclose(F.conv_transpose1d(x, t64([[[1.0]]])).data, x.data)

    rng = np.random.default_rng(1)
    w = t64(rng.standard_normal((3, 2, 4)))
    signal = t64(rng.standard_normal((2, 2, 16)))
    forward = F.conv1d(signal, w, stride=2)
    assert forward.shape == (2, 3, 7)
    y = rng.standard_normal(forward.shape)
    adjoint = F.conv_transpose1d(t64(y), w, stride=2, output_length=16)
    lhs = float(np.sum(forward.data * y))
    rhs = float(np.sum(signal.data * adjoint.data))
    assert abs(lhs - rhs) < 1e-6
    logger.info("✅ Transposed convolution is the adjoint of the strided one")


def test_activation_values():
    assert F.leaky_relu(t64([-1.0]), 0.2).data[0] == pytest.approx(-0.2)
    assert F.tanh(t64([0.0])).data[0] == 0.0
    assert F.sigmoid(t64([0.0])).data[0] == 0.5

    x = t64([0.0], requires_grad=True)
    F.sum(F.sigmoid(x)).backward()
    h = 1e-5
    numeric = (1 / (1 + np.exp(-h)) - 1 / (1 + np.exp(h))) / (2 * h)
    assert x.grad[0] == pytest.approx(0.25)
    assert abs(x.grad[0] - numeric) < 1e-8


def test_backward_simple_losses():
    x = t64([1.0, 2.0], requires_grad=True)
    F.sum(x).backward()
    np.testing.assert_array_equal(x.grad, [1.0, 1.0])

    x.zero_grad()
    F.sum(x * x).backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0])

    # no reset: gradients accumulate
    F.sum(x * x).backward()
    np.testing.assert_allclose(x.grad, [4.0, 8.0])


def test_disconnected_parameter_gets_zero_grad():
    used = t64([1.0, 2.0], requires_grad=True)
    unused = t64([3.0], requires_grad=True)
    loss = F.sum(used * 3.0)
    backward(ComputeGraph.trace(loss), loss, parameters=[used, unused])
    np.testing.assert_allclose(used.grad, [3.0, 3.0])
    np.testing.assert_array_equal(unused.grad, [0.0])


def test_no_grad_restores_mode():
    x = Tensor(np.ones(3), requires_grad=True)
    assert is_grad_enabled()
    with no_grad():
        with no_grad():
            assert not (x * 2.0).requires_grad
        assert not is_grad_enabled()
    assert is_grad_enabled()
    assert (x * 2.0).requires_grad


def test_non_scalar_backward_needs_gradient():
    x = t64([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()


def test_broadcast_rules():
    a = t64(np.ones((2, 3)), requires_grad=True)
    with pytest.raises(ShapeError):
        a + t64(np.ones(3))
    with pytest.raises(ShapeError):
        t64(np.ones(3)) * np.ones((2, 3))
    out = a * np.array([1.0, 2.0, 3.0])
    assert out.shape == (2, 3)


def test_three_layer_conv_net_gradcheck():
    rng = np.random.default_rng(2)
    x = Tensor(rng.standard_normal((2, 2, 20)), requires_grad=True)
    w1 = Tensor(rng.standard_normal((4, 2, 3)) * 0.5, requires_grad=True)
    w2 = Tensor(rng.standard_normal((4, 4, 3)) * 0.5, requires_grad=True)
    w3 = Tensor(rng.standard_normal((1, 4, 3)) * 0.5, requires_grad=True)
    b1 = Tensor(rng.standard_normal(4) * 0.1, requires_grad=True)

    def net(x, w1, w2, w3, b1):
        h = F.leaky_relu(F.conv1d(F.pad1d(x, 2), w1, b1))
        h = F.tanh(F.conv1d(F.pad1d(h, 4), w2, dilation=2))
        return F.conv1d(h, w3, stride=2)

    result = gradcheck(net, [x, w1, w2, w3, b1])
    assert result.passed, result.per_input
    logger.info(f"✅ Conv net gradcheck max relative error {result.max_relative_error:.2e}")


@pytest.mark.parametrize("name", [
    "conv_transpose", "batch_norm", "stft", "frame_convolve", "overlap_add", "pool_crop_concat", "dense_exp_log"
])
def test_operation_gradients(name):
    rng = np.random.default_rng(3)
    if name == "conv_transpose":
        inputs = [Tensor(rng.standard_normal((2, 3, 6)), requires_grad=True),
                  Tensor(rng.standard_normal((3, 2, 4)), requires_grad=True),
                  Tensor(rng.standard_normal(2), requires_grad=True)]

        def fn(x, w, b):
            return F.conv_transpose1d(F.pad1d(x, 1), w, b, stride=2, padding=2, output_length=12)
    elif name == "batch_norm":
        inputs = [Tensor(rng.standard_normal((3, 2, 5)), requires_grad=True),
                  Tensor(rng.uniform(0.5, 1.5, 2), requires_grad=True),
                  Tensor(rng.standard_normal(2), requires_grad=True)]

        def fn(x, gamma, beta):
            return F.batch_norm(x, gamma, beta, np.zeros(2), np.ones(2), training=True)
    elif name == "stft":
        inputs = [Tensor(rng.standard_normal((2, 64)), requires_grad=True)]
        window = np.hanning(33)[:-1]

        def fn(x):
            return F.stft_amplitude(x, 32, window)
    elif name == "frame_convolve":
        noise = rng.uniform(-1, 1, (2, 3, 8))
        inputs = [Tensor(rng.standard_normal((2, 3, 5)), requires_grad=True)]

        def fn(h):
            return F.frame_convolve(h, noise)
    elif name == "overlap_add":
        inputs = [Tensor(rng.standard_normal((2, 5, 6)), requires_grad=True)]

        def fn(x):
            return F.overlap_add(x, 3)
    elif name == "pool_crop_concat":
        inputs = [Tensor(rng.standard_normal((1, 2, 9)), requires_grad=True),
                  Tensor(rng.standard_normal((1, 2, 4)), requires_grad=True)]

        def fn(a, b):
            return F.concat([F.avg_pool1d(a, 2), F.crop(b, 1, 3)], axis=-1)
    else:
        inputs = [Tensor(rng.standard_normal((4, 3)), requires_grad=True),
                  Tensor(rng.standard_normal((3, 2)), requires_grad=True),
                  Tensor(rng.standard_normal(2), requires_grad=True)]

        def fn(x, w, b):
            return F.log(F.exp(F.dense(x, w, b)) + 1.0)

    result = gradcheck(fn, inputs)
    assert result.passed, f"{name}: {result.per_input}"


def _away_from(values: np.ndarray, points, margin: float = 0.01) -> np.ndarray:
    for point in points:
        values = np.where(np.abs(values - point) < margin, values + 5 * margin, values)
    return values


ELEMENTWISE_CASES = 100


@pytest.mark.parametrize("name", ["tanh", "sigmoid", "sqrt", "div", "clamp"])
def test_elementwise_gradients_over_random_cases(name):
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(ELEMENTWISE_CASES):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)))
        if name == "tanh":
            inputs, fn = [Tensor(rng.standard_normal(shape) * 2.0, requires_grad=True)], F.tanh
        elif name == "sigmoid":
            inputs, fn = [Tensor(rng.standard_normal(shape) * 3.0, requires_grad=True)], F.sigmoid
        elif name == "sqrt":
            inputs, fn = [Tensor(rng.uniform(0.1, 4.0, shape), requires_grad=True)], F.sqrt
        elif name == "div":
            denominator = rng.uniform(0.5, 2.0, shape) * rng.choice([-1.0, 1.0], shape)
            inputs = [Tensor(rng.standard_normal(shape), requires_grad=True),
                      Tensor(denominator, requires_grad=True)]

            def fn(a, b):
                return a / b
        else:
            inputs = [Tensor(_away_from(rng.uniform(-2.0, 2.0, shape), (-0.5, 0.5)), requires_grad=True)]

            def fn(x):
                return F.clamp(x, -0.5, 0.5)

        result = gradcheck(fn, inputs, seed=int(rng.integers(1 << 31)))
        assert result.passed, f"{name}: {result.per_input}"
        worst = max(worst, result.max_relative_error)
    logger.info(f"✅ {name} gradcheck over {ELEMENTWISE_CASES} cases, worst relative error {worst:.2e}")


def test_composed_model_gradcheck(tiny_config):
    with float64_mode():
        model = RaveModel(tiny_config)
    model.eval()

    def pipeline(x):
        audio = model.decode(model.encode(x).mean)
        logits = model.discriminate(audio).logits
        return F.concat([F.reshape(logit, (logit.data.size,)) for logit in logits], axis=-1)

    for seed in range(3):
        x = Tensor(np.random.default_rng(seed).uniform(-0.5, 0.5, (1, 64)), requires_grad=True)
        result = gradcheck(pipeline, [x], step=1e-6, max_entries=16, seed=seed)
        assert result.passed, result.per_input
    logger.info(f"✅ Encoder to decoder to discriminator gradcheck {result.max_relative_error:.2e}")


def test_batch_norm_modes():
    bn = BatchNorm1d(2)
    rng = np.random.default_rng(4)
    x = rng.standard_normal((4, 2, 8))
    x = (x - x.mean(axis=(0, 2), keepdims=True)) / x.std(axis=(0, 2), keepdims=True)
    out = bn(Tensor(x))
    np.testing.assert_allclose(out.data, x, atol=1e-4)

    constant = Tensor(np.full((3, 2, 5), 7.0))
    np.testing.assert_allclose(bn(constant).data, 0.0, atol=1e-6)

    with pytest.raises(StatisticsError):
        bn(Tensor(np.ones((1, 2, 5))))

    bn.eval()
    sample = Tensor(rng.standard_normal((1, 2, 8)))
    np.testing.assert_array_equal(bn(sample).data, bn(sample).data)
    logger.info("✅ Batch norm train and eval modes")


def test_causal_conv_layers():
    rng = np.random.default_rng(5)
    conv = Conv1d(2, 3, 3, rng, dilation=2)
    assert conv.left_context == 4
    x = np.zeros((1, 2, 12))
    x[0, :, 6] = 1.0
    out = conv(Tensor(x)).data
    # nothing before the impulse beyond the bias
    np.testing.assert_allclose(out[0, :, :6], np.repeat(conv.bias.data[:, None], 6, axis=1), atol=1e-6)

    up = ConvTranspose1d(2, 2, 4, rng)
    assert up.left_context == 1
    y = up(Tensor(rng.standard_normal((1, 2, 5))))
    assert y.shape == (1, 2, 20)


def test_module_state_dict_round_trip():
    rng = np.random.default_rng(6)
    dense = Dense(3, 2, rng)
    other = Dense(3, 2, np.random.default_rng(7))
    other.load_state_dict(dense.state_dict())
    np.testing.assert_array_equal(other.weight.data, dense.weight.data)
    assert dense.parameter_count() == 8

    with pytest.raises(CheckpointError):
        other.load_state_dict({"weight": np.zeros((3, 2))})
    with pytest.raises(CheckpointError):
        other.load_state_dict({"weight": np.zeros((2, 3)), "bias": np.zeros(2)})


def test_adam_zero_grad_keeps_parameters():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True, dtype=np.float64)
    opt = Adam([p], lr=1e-3)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert opt.lr == 1e-3 and opt.betas == (0.5, 0.9)


def test_adam_constant_gradient_step_size():
    p = Tensor(np.array([0.0, 0.0]), requires_grad=True, dtype=np.float64)
    state = AdamState.zeros_like([p])
    grad = np.array([3.0, -0.5])
    for _ in range(200):
        before = p.data.copy()
        adam_step([p], [grad], state, lr=1e-4)
    delta = before - p.data
    np.testing.assert_allclose(np.abs(delta), 1e-4, rtol=1e-3)
    assert np.all(np.sign(delta) == np.sign(grad))
    assert state.step == 200


def test_adam_state_round_trip():
    p = Tensor(np.ones(3), requires_grad=True)
    opt = Adam([p])
    p.grad = np.ones(3, dtype=p.data.dtype)
    opt.step()
    arrays = opt.state_dict("optim.x")
    assert set(arrays) == {"optim.x.m.0", "optim.x.v.0"}

    fresh = Adam([Tensor(np.ones(3), requires_grad=True)])
    fresh.load_state_dict(arrays, "optim.x", step=opt.state.step)
    np.testing.assert_array_equal(fresh.state.first[0], opt.state.first[0])
    assert fresh.state.step == 1


def test_float64_mode_scoped():
    assert default_dtype() == np.float32
    with float64_mode():
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32
