"""Non-mixer building blocks, channel-last layout [B, H, W, C].

Modules own Parameters and expose forward(Var) -> Var; the functional forms
underneath take explicit parameter Vars so tests can drive them directly.
"""

import math

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .errors import ShapeError

# StarReLU init: for z ~ N(0,1), E[relu(z)^2] = 1/2 and Var[relu(z)^2] = 5/4,
# so scale 1/sqrt(1.25), bias -0.5/sqrt(1.25) give zero-mean unit-variance out.
STAR_RELU_SCALE = 1.0 / math.sqrt(1.25)
STAR_RELU_BIAS = -0.5 / math.sqrt(1.25)


def trunc_normal(rng, shape, std=0.02, dtype=np.float64):
    """Normal(0, std^2) truncated to +-2 sigma by resampling."""
    x = rng.standard_normal(shape)
    bad = np.abs(x) > 2.0
    while bad.any():
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 2.0
    return (x * std).astype(dtype)


class Module:
    """Base class: parameter discovery walks attributes in definition order."""

    def named_parameters(self, prefix=""):
        out = []
        for name, val in vars(self).items():
            self._collect(prefix + "." + name if prefix else name, val, out)
        return out

    @staticmethod
    def _collect(path, val, out):
        if isinstance(val, Parameter):
            out.append((path, val))
        elif isinstance(val, Module):
            out.extend(val.named_parameters(path))
        elif isinstance(val, (list, tuple)):
            for i, item in enumerate(val):
                Module._collect("%s.%d" % (path, i), item, out)

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def assign_names(self):
        for name, p in self.named_parameters():
            p.name = name

    def __call__(self, x):
        return self.forward(x)


# ---------------------------------------------------------------------------
# functional forms


def layer_norm(x, scale, shift, eps=1e-6):
    """Normalize over the last (channel) axis, then affine."""
    if x.data.shape[-1] != scale.data.shape[-1]:
        raise ShapeError(
            "layer_norm channel %d does not match params %d"
            % (x.data.shape[-1], scale.data.shape[-1])
        )
    mu = ag.mean(x, axis=-1, keepdims=True)
    d = ag.sub(x, mu)
    v = ag.mean(ag.mul(d, d), axis=-1, keepdims=True)
    inv = ag.pow_const(v + eps, -0.5)
    return ag.mul(d, inv) * scale + shift


def star_relu(x, s, b):
    r = ag.relu(x)
    return ag.mul(r, r) * s + b


def squared_relu(x):
    r = ag.relu(x)
    return ag.mul(r, r)


def pointwise_conv(x, w):
    """Per-pixel channel matmul. x: [..., Cin], w: [Cin, Cout]."""
    cin, cout = w.data.shape
    if x.data.shape[-1] != cin:
        raise ShapeError(
            "pointwise_conv channels %d vs weight %r"
            % (x.data.shape[-1], w.data.shape)
        )
    lead = x.data.shape[:-1]
    y = ag.matmul(ag.reshape(x, (-1, cin)), w)
    return ag.reshape(y, lead + (cout,))


def depthwise_conv(x, k):
    """Per-channel same-size 2D cross-correlation, zero padded, stride 1."""
    return ag.depthwise_conv2d(x, k)


def global_avg_pool(x):
    """Spatial mean per channel: [B, H, W, C] -> [B, C]."""
    return ag.mean(x, axis=(1, 2))


# ---------------------------------------------------------------------------
# modules


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-6, dtype=np.float64):
        self.scale = Parameter(np.ones(dim, dtype=dtype))
        self.shift = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x):
        t = x.tape
        return layer_norm(x, t.watch(self.scale), t.watch(self.shift), self.eps)


class StarReLU(Module):
    def __init__(self, dtype=np.float64):
        self.s = Parameter(np.asarray(STAR_RELU_SCALE, dtype=dtype))
        self.b = Parameter(np.asarray(STAR_RELU_BIAS, dtype=dtype))

    def forward(self, x):
        t = x.tape
        return star_relu(x, t.watch(self.s), t.watch(self.b))


class SquaredReLU(Module):
    def forward(self, x):
        return squared_relu(x)


class Linear(Module):
    def __init__(self, cin, cout, bias, rng, dtype=np.float64):
        self.weight = Parameter(trunc_normal(rng, (cin, cout), dtype=dtype))
        if bias:
            self.bias = Parameter(np.zeros(cout, dtype=dtype))
        else:
            self.bias = None

    def forward(self, x):
        t = x.tape
        y = pointwise_conv(x, t.watch(self.weight))
        if self.bias is not None:
            y = ag.add(y, t.watch(self.bias))
        return y


class Scale(Module):
    """Learnable per-channel multiplier (the ResScale of the last stages)."""

    def __init__(self, dim, init=1.0, dtype=np.float64):
        self.value = Parameter(np.full(dim, init, dtype=dtype))

    def forward(self, x):
        return ag.mul(x, x.tape.watch(self.value))


class Mlp(Module):
    """fc1 -> StarReLU -> fc2, bias-free."""

    def __init__(self, dim, hidden, out, rng, dtype=np.float64):
        self.fc1 = Linear(dim, hidden, False, rng, dtype)
        self.act = StarReLU(dtype)
        self.fc2 = Linear(hidden, out, False, rng, dtype)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class MlpHead(Module):
    """Classifier head: fc1 -> SquaredReLU -> LayerNorm -> fc2, with biases."""

    def __init__(self, dim, num_classes, rng, ratio=4, dtype=np.float64):
        hidden = dim * ratio
        self.fc1 = Linear(dim, hidden, True, rng, dtype)
        self.act = SquaredReLU()
        self.norm = LayerNorm(hidden, dtype=dtype)
        self.fc2 = Linear(hidden, num_classes, True, rng, dtype)

    def forward(self, x):
        return self.fc2(self.norm(self.act(self.fc1(x))))


class Conv2d(Module):
    """Dense strided conv for the stem and downsampling, bias included."""

    def __init__(self, cin, cout, kernel, stride, pad, rng, bias=True,
                 dtype=np.float64):
        self.weight = Parameter(
            trunc_normal(rng, (kernel, kernel, cin, cout), dtype=dtype)
        )
        self.bias = Parameter(np.zeros(cout, dtype=dtype)) if bias else None
        self.stride = stride
        self.pad = pad

    def forward(self, x):
        t = x.tape
        b = t.watch(self.bias) if self.bias is not None else None
        return ag.conv2d(x, t.watch(self.weight), b, self.stride, self.pad)


class DepthwiseConv(Module):
    def __init__(self, dim, kernel, rng, dtype=np.float64):
        self.weight = Parameter(
            trunc_normal(rng, (dim, kernel, kernel), dtype=dtype)
        )

    def forward(self, x):
        return ag.depthwise_conv2d(x, x.tape.watch(self.weight))
