"""Non-mixer layers: activation constants, norm arithmetic, convolutions,
initializer bounds, and parameter collection."""

import numpy as np
import pytest

from dfformer import autograd as ag
from dfformer.autograd import Parameter, Tape
from dfformer.errors import ShapeError
from dfformer.layers import (
    STAR_RELU_BIAS,
    STAR_RELU_SCALE,
    Conv2d,
    DepthwiseConv,
    LayerNorm,
    Linear,
    Mlp,
    MlpHead,
    Module,
    Scale,
    SquaredReLU,
    StarReLU,
    global_avg_pool,
    layer_norm,
    pointwise_conv,
    trunc_normal,
)


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def test_star_relu_constants():
    assert STAR_RELU_SCALE == pytest.approx(1.0 / np.sqrt(1.25), abs=1e-15)
    assert STAR_RELU_BIAS == pytest.approx(-0.5 / np.sqrt(1.25), abs=1e-15)


def test_star_relu_forward():
    act = StarReLU()
    assert act.s.value.shape == ()
    assert act.b.value.shape == ()
    tape = Tape(record=False)
    x = np.array([-1.0, 0.0, 2.0])
    got = act(tape.const(x)).data
    want = STAR_RELU_SCALE * np.maximum(x, 0.0) ** 2 + STAR_RELU_BIAS
    assert np.abs(got - want).max() < 1e-15


def test_star_relu_normalizes_gaussian():
    # s, b are chosen so a standard normal input keeps mean 0, variance 1
    x = _rng(1).standard_normal(2_000_00)
    y = STAR_RELU_SCALE * np.maximum(x, 0.0) ** 2 + STAR_RELU_BIAS
    assert abs(y.mean()) < 0.01
    assert abs(y.var() - 1.0) < 0.03


def test_squared_relu():
    tape = Tape(record=False)
    x = np.array([-2.0, 3.0])
    got = SquaredReLU()(tape.const(x)).data
    assert np.array_equal(got, np.array([0.0, 9.0]))


def test_trunc_normal_bounds_and_spread():
    rng = _rng(2)
    w = trunc_normal(rng, (200, 200), std=0.02)
    assert np.abs(w).max() <= 2 * 0.02 + 1e-12
    assert 0.015 < w.std() < 0.025
    assert abs(w.mean()) < 1e-3


def test_layer_norm_matches_manual():
    rng = _rng(3)
    x = rng.standard_normal((2, 3, 4, 6))
    scale = Parameter(rng.standard_normal(6) * 0.1 + 1.0, name="s")
    shift = Parameter(rng.standard_normal(6) * 0.1, name="b")
    tape = Tape(record=False)
    got = layer_norm(tape.const(x), tape.watch(scale), tape.watch(shift)).data
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    want = (x - mu) / np.sqrt(var + 1e-6) * scale.value + shift.value
    assert np.abs(got - want).max() < 1e-12
    with pytest.raises(ShapeError):
        layer_norm(tape.const(np.zeros((2, 5))), tape.watch(scale),
                   tape.watch(shift))


def test_layer_norm_output_moments():
    rng = _rng(4)
    x = rng.standard_normal((4, 8)) * 3.0 + 5.0
    norm = LayerNorm(8)
    tape = Tape(record=False)
    y = norm(tape.const(x)).data
    assert np.abs(y.mean(axis=-1)).max() < 1e-10
    assert np.abs(y.std(axis=-1) - 1.0).max() < 1e-3


def test_pointwise_conv_is_channel_matmul():
    rng = _rng(5)
    x = rng.standard_normal((2, 3, 3, 4))
    w = Parameter(rng.standard_normal((4, 6)), name="w")
    tape = Tape(record=False)
    got = pointwise_conv(tape.const(x), tape.watch(w)).data
    assert got.shape == (2, 3, 3, 6)
    assert np.abs(got - x @ w.value).max() < 1e-12
    with pytest.raises(ShapeError):
        pointwise_conv(tape.const(np.zeros((2, 3, 3, 5))), tape.watch(w))


def test_linear_bias_flag():
    rng = _rng(6)
    with_bias = Linear(4, 3, True, rng)
    without = Linear(4, 3, False, rng)
    assert with_bias.bias is not None
    assert without.bias is None
    names = [n for n, _ in without.named_parameters()]
    assert names == ["weight"]


def test_mlp_structure():
    rng = _rng(7)
    mlp = Mlp(6, 24, 6, rng)
    names = [n for n, _ in mlp.named_parameters()]
    # block linears carry no bias
    assert "fc1.bias" not in names and "fc2.bias" not in names
    tape = Tape(record=False)
    out = mlp(tape.const(_rng(8).standard_normal((2, 3, 3, 6))))
    assert out.data.shape == (2, 3, 3, 6)


def test_mlp_head_structure():
    rng = _rng(9)
    head = MlpHead(8, 5, rng)
    names = [n for n, _ in head.named_parameters()]
    assert "fc1.bias" in names and "fc2.bias" in names
    assert head.fc1.weight.value.shape == (8, 32)
    tape = Tape(record=False)
    out = head(tape.const(_rng(10).standard_normal((3, 8))))
    assert out.data.shape == (3, 5)


def test_conv2d_geometry():
    rng = _rng(11)
    conv = Conv2d(3, 8, 7, 4, 2, rng)
    tape = Tape(record=False)
    out = conv(tape.const(rng.standard_normal((2, 32, 32, 3))))
    assert out.data.shape == (2, 8, 8, 8)


def test_depthwise_conv_preserves_channels():
    rng = _rng(12)
    dw = DepthwiseConv(5, 7, rng)
    assert dw.weight.value.shape == (5, 7, 7)
    tape = Tape(record=False)
    out = dw(tape.const(rng.standard_normal((2, 9, 9, 5))))
    assert out.data.shape == (2, 9, 9, 5)


def test_global_avg_pool():
    rng = _rng(13)
    x = rng.standard_normal((2, 4, 5, 3))
    tape = Tape(record=False)
    got = global_avg_pool(tape.const(x)).data
    assert np.abs(got - x.mean(axis=(1, 2))).max() < 1e-12


def test_scale_multiplies():
    s = Scale(4, init=1.0)
    assert np.array_equal(s.value.value, np.ones(4))
    s.value.value[...] = 2.0
    tape = Tape(record=False)
    out = s(tape.const(np.ones((2, 4))))
    assert np.array_equal(out.data, np.full((2, 4), 2.0))


def test_module_collects_nested_parameters():
    class Inner(Module):
        def __init__(self):
            self.w = Parameter(np.zeros(2), name="")

    class Outer(Module):
        def __init__(self):
            self.blocks = [[Inner(), Inner()], [Inner()]]
            self.solo = Parameter(np.zeros(1), name="")

    m = Outer()
    m.assign_names()
    names = [n for n, _ in m.named_parameters()]
    assert "blocks.0.0.w" in names
    assert "blocks.0.1.w" in names
    assert "blocks.1.0.w" in names
    assert "solo" in names
    assert len(list(m.parameters())) == 4
    for _, p in m.named_parameters():
        assert p.name != ""


def test_zero_grad_recurses():
    rng = _rng(14)
    mlp = Mlp(4, 8, 4, rng)
    for p in mlp.parameters():
        p.grad[...] = 1.0
    mlp.zero_grad()
    assert all(np.all(p.grad == 0) for p in mlp.parameters())
