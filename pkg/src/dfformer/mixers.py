"""Token mixers: dynamic spectral filter, static global filter, separable
convolution, and a forward-only attention mixer for throughput comparisons.

All mixers map [B, H, W, C] -> [B, H, W, C] and carry their own channel
expansion: pw1 (C -> C' = 2C) -> StarReLU -> core -> pw2 (C' -> C).
"""

import math

import numpy as np

from . import autograd as ag
from . import spectral as sp
from .autograd import Parameter
from .errors import ContractError, ShapeError
from .layers import DepthwiseConv, Linear, Module, StarReLU
from .layers import LayerNorm, global_avg_pool


def _complex_of(dtype):
    return np.complex64 if np.dtype(dtype) == np.float32 else np.complex128


class FilterBasis(Module):
    """N learnable complex filters on the half spectrum of an HxW grid."""

    def __init__(self, H, W, n_filters, rng, dtype=np.float64):
        if n_filters < 1:
            raise ShapeError("filter basis needs n_filters >= 1")
        wh = W // 2 + 1
        re = rng.standard_normal((H, wh, n_filters))
        im = rng.standard_normal((H, wh, n_filters))
        w = ((re + 1j * im) * 0.02).astype(_complex_of(dtype))
        self.weights = Parameter(w)
        self.H = H
        self.W = W

    @classmethod
    def from_weights(cls, weights, H, W):
        obj = cls.__new__(cls)
        obj.weights = Parameter(np.ascontiguousarray(weights))
        obj.H = H
        obj.W = W
        return obj

    @property
    def n_filters(self):
        return self.weights.value.shape[2]


class RouteingMlp(Module):
    """Per-sample filter coefficients: LN -> W1 -> StarReLU -> W2.

    Emits n_filters * med_channels logits from a pooled [B, C] input.
    """

    def __init__(self, dim, n_filters, med_channels, rng, ratio=0.25,
                 dtype=np.float64):
        hidden = int(ratio * dim)
        self.norm = LayerNorm(dim, dtype=dtype)
        self.fc1 = Linear(dim, hidden, False, rng, dtype)
        self.act = StarReLU(dtype)
        self.fc2 = Linear(hidden, n_filters * med_channels, False, rng, dtype)
        self.dim = dim
        self.n_filters = n_filters
        self.med_channels = med_channels

    def forward(self, pooled):
        return self.fc2(self.act(self.fc1(self.norm(pooled))))


def routeing_weights(x, m):
    """Coefficients [B, N, C'] from spatially pooled x, softmax over N."""
    if x.data.shape[-1] != m.dim:
        raise ShapeError(
            "routeing expects %d channels, got %d" % (m.dim, x.data.shape[-1])
        )
    logits = m(global_avg_pool(x))
    b = logits.data.shape[0]
    r = ag.reshape(logits, (b, m.n_filters, m.med_channels))
    return ag.softmax(r, axis=1)


def dynamic_filter_forward(x, basis, m, pw1, pw2, act):
    """Spectral gating with a per-sample, per-channel mixed filter.

    Coefficients come from the original x; the gated features are
    act(pw1(x)). Output channel count equals the input's.
    """
    xd = x.data
    if not np.isfinite(xd).all():
        raise ContractError("dynamic filter input contains non-finite values")
    b, h, w, _ = xd.shape
    if (h, w) != (basis.H, basis.W):
        raise ShapeError(
            "input extent %dx%d does not match filter basis %dx%d; resample "
            "the basis with interpolate_filter_basis(basis, %d, %d) first"
            % (h, w, basis.H, basis.W, h, w)
        )
    r = routeing_weights(x, m)
    y = act(pw1(x))
    y = ag.transpose(y, (0, 3, 1, 2))
    plan = sp.get_plan(h, w)
    z = sp.rfft2_var(y, plan)
    k = sp.combine_filters(r, x.tape.watch(basis.weights))
    z = sp.cmul(z, k)
    y = sp.irfft2_var(z, plan)
    y = ag.transpose(y, (0, 2, 3, 1))
    return pw2(y)


def global_filter_forward(x, K):
    """irfft2(K * rfft2(x)) per channel. K: complex [H, W//2+1, C]."""
    kd = K.value if isinstance(K, Parameter) else K.data
    b, h, w, c = x.data.shape
    if kd.shape != (h, w // 2 + 1, c):
        raise ShapeError(
            "filter %r does not match input %dx%dx%d half spectrum"
            % (kd.shape, h, w // 2 + 1, c)
        )
    kvar = x.tape.watch(K) if isinstance(K, Parameter) else K
    y = ag.transpose(x, (0, 3, 1, 2))
    plan = sp.get_plan(h, w)
    z = sp.rfft2_var(y, plan)
    z = sp.cmul(z, ag.transpose(kvar, (2, 0, 1)))
    y = sp.irfft2_var(z, plan)
    return ag.transpose(y, (0, 2, 3, 1))


class DynamicFilter(Module):
    """Dynamic filter mixer (expansion 2, N mixed basis filters)."""

    def __init__(self, dim, H, W, rng, n_filters=4, ratio=0.25,
                 expansion=2, dtype=np.float64):
        med = int(expansion * dim)
        self.pw1 = Linear(dim, med, False, rng, dtype)
        self.act = StarReLU(dtype)
        self.routeing = RouteingMlp(dim, n_filters, med, rng, ratio, dtype)
        self.basis = FilterBasis(H, W, n_filters, rng, dtype)
        self.pw2 = Linear(med, dim, False, rng, dtype)

    def forward(self, x):
        return dynamic_filter_forward(
            x, self.basis, self.routeing, self.pw1, self.pw2, self.act
        )


class GlobalFilter(Module):
    """Static per-channel spectral filter (expansion 2)."""

    def __init__(self, dim, H, W, rng, expansion=2, dtype=np.float64):
        med = int(expansion * dim)
        self.pw1 = Linear(dim, med, False, rng, dtype)
        self.act = StarReLU(dtype)
        wh = W // 2 + 1
        re = rng.standard_normal((H, wh, med))
        im = rng.standard_normal((H, wh, med))
        self.filt = Parameter(((re + 1j * im) * 0.02).astype(_complex_of(dtype)))
        self.pw2 = Linear(med, dim, False, rng, dtype)
        self.H = H
        self.W = W

    def forward(self, x):
        _, h, w, _ = x.data.shape
        if (h, w) != (self.H, self.W):
            raise ShapeError(
                "input extent %dx%d does not match filter %dx%d"
                % (h, w, self.H, self.W)
            )
        y = self.act(self.pw1(x))
        return self.pw2(global_filter_forward(y, self.filt))


class SepConv(Module):
    """Separable convolution mixer: pw1 -> StarReLU -> depthwise 7x7 -> pw2."""

    def __init__(self, dim, rng, expansion=2, kernel=7, dtype=np.float64):
        med = int(expansion * dim)
        self.pw1 = Linear(dim, med, False, rng, dtype)
        self.act = StarReLU(dtype)
        self.dw = DepthwiseConv(med, kernel, rng, dtype)
        self.pw2 = Linear(med, dim, False, rng, dtype)

    def forward(self, x):
        return self.pw2(self.dw(self.act(self.pw1(x))))


def attention_forward(x, heads, wqkv, wproj):
    """Scaled dot-product self-attention over the HW token axis.

    Plain numpy forward: x [B,H,W,C], wqkv [C,3C], wproj [C,C].
    """
    b, h, w, c = x.shape
    if c % heads != 0:
        raise ShapeError("channels %d not divisible by %d heads" % (c, heads))
    d = c // heads
    t = h * w
    qkv = x.reshape(b, t, c) @ wqkv
    q, k, v = (
        qkv[:, :, i * c : (i + 1) * c].reshape(b, t, heads, d).transpose(0, 2, 1, 3)
        for i in range(3)
    )
    att = q @ k.transpose(0, 1, 3, 2) / math.sqrt(d)
    att = att - att.max(axis=-1, keepdims=True)
    att = np.exp(att)
    att /= att.sum(axis=-1, keepdims=True)
    out = (att @ v).transpose(0, 2, 1, 3).reshape(b, t, c)
    return (out @ wproj).reshape(b, h, w, c)


class AttentionMixer(Module):
    """Forward-only attention mixer, used for throughput comparisons."""

    def __init__(self, dim, heads, rng, dtype=np.float64):
        if dim % heads != 0:
            raise ShapeError("dim %d not divisible by %d heads" % (dim, heads))
        self.qkv = Linear(dim, 3 * dim, False, rng, dtype)
        self.proj = Linear(dim, dim, False, rng, dtype)
        self.heads = heads

    def forward(self, x):
        y = attention_forward(
            x.data, self.heads, self.qkv.weight.value, self.proj.weight.value
        )

        def bwd(g):
            raise ContractError("attention mixer has no backward rule")

        return ag.record(x.tape, y, (x,), bwd)


# ---------------------------------------------------------------------------
# resolution transfer


def _cubic_weights(t):
    """Catmull-Rom (a = -0.5) weights for taps at offsets -1, 0, 1, 2."""
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def _resample_matrix(n_src, n_dst):
    """Dense [n_dst, n_src] bicubic resampling matrix, edges clamped."""
    m = np.zeros((n_dst, n_src))
    if n_src == 1:
        m[:, 0] = 1.0
        return m
    for i in range(n_dst):
        src = i * (n_src - 1) / (n_dst - 1) if n_dst > 1 else 0.0
        j = int(math.floor(src))
        for off, wt in zip((-1, 0, 1, 2), _cubic_weights(src - j)):
            m[i, min(max(j + off, 0), n_src - 1)] += wt
    return m


def resample_half_spectrum(src, new_h, new_wh):
    """Bicubically resample [H, Wh, N] planes onto a [new_h, new_wh] grid."""
    mh = _resample_matrix(src.shape[0], new_h)
    mw = _resample_matrix(src.shape[1], new_wh)
    out = np.empty((new_h, new_wh, src.shape[2]), dtype=src.dtype)
    for n in range(src.shape[2]):
        out[:, :, n] = (mh @ src[:, :, n]) @ mw.T
    return out


def interpolate_filter_basis(basis, new_h, new_w):
    """Bicubically resample a basis onto a new grid's half spectrum.

    Real and imaginary planes resample independently; same-size requests
    return a bitwise copy.
    """
    if new_h < 1 or new_w < 1:
        raise ShapeError("target extents must be positive, got %dx%d"
                         % (new_h, new_w))
    src = basis.weights.value
    if (new_h, new_w) == (basis.H, basis.W):
        return FilterBasis.from_weights(src.copy(), basis.H, basis.W)
    out = resample_half_spectrum(src, new_h, new_w // 2 + 1)
    return FilterBasis.from_weights(out, new_h, new_w)
