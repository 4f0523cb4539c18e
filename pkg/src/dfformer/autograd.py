"""Reverse-mode differentiation tape over dense numpy arrays.

A Tape records every operation produced while it is live; backward() replays
the records in reverse order, accumulating cotangents into Parameter.grad.
Complex intermediates use the (re, im) pair convention: the stored gradient
of a complex array z is dL/d(Re z) + 1j * dL/d(Im z). Ops never mutate their
inputs. Broadcasting follows numpy; gradients are reduced back to the operand
shape by summation.
"""

import numpy as np

from .errors import ContractError, ShapeError


class Parameter:
    """A named leaf tensor with a persistent gradient buffer."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name=""):
        self.value = np.asarray(value)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0

    def numel(self):
        """Element count; complex elements count as two (re, im)."""
        n = self.value.size
        return 2 * n if np.iscomplexobj(self.value) else n


class Var:
    """Handle to one node of a tape: the forward value plus backward wiring."""

    __slots__ = ("data", "tape", "parents", "bwd", "param")

    def __init__(self, data, tape, parents=(), bwd=None, param=None):
        self.data = data
        self.tape = tape
        self.parents = parents
        self.bwd = bwd
        self.param = param

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    # arithmetic sugar; scalars and arrays are wrapped as constants
    def __add__(self, other):
        return add(self, _wrap(self.tape, other))

    def __radd__(self, other):
        return add(_wrap(self.tape, other), self)

    def __sub__(self, other):
        return sub(self, _wrap(self.tape, other))

    def __rsub__(self, other):
        return sub(_wrap(self.tape, other), self)

    def __mul__(self, other):
        return mul(self, _wrap(self.tape, other))

    def __rmul__(self, other):
        return mul(_wrap(self.tape, other), self)

    def __truediv__(self, other):
        return div(self, _wrap(self.tape, other))

    def __neg__(self):
        return neg(self)


class Tape:
    """Single-owner record of one forward pass.

    record=False keeps the same op API but drops all backward wiring, for
    inference and finite-difference probes.
    """

    def __init__(self, record=True):
        self.record = record
        self.nodes = []
        self._watched = {}

    def const(self, data):
        """Wrap an array as a gradient-less leaf (not recorded)."""
        return Var(np.asarray(data), self)

    def watch(self, param):
        """Leaf node for a Parameter, memoized so repeated use of the same
        parameter accumulates into one grad buffer."""
        v = self._watched.get(id(param))
        if v is None:
            v = Var(param.value, self, (), None, param if self.record else None)
            if self.record:
                self.nodes.append(v)
            self._watched[id(param)] = v
        return v

    def backward(self, loss):
        if loss.tape is not self:
            raise ContractError("loss does not belong to this tape")
        if not self.record:
            raise ContractError("tape was created with record=False")
        if loss.data.size != 1:
            raise ContractError(
                "loss must be scalar, got shape %r" % (loss.shape,)
            )
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.param is not None:
                node.param.grad += g
            if node.bwd is None:
                continue
            pgrads = node.bwd(g)
            for parent, pg in zip(node.parents, pgrads):
                if pg is None:
                    continue
                key = id(parent)
                acc = grads.get(key)
                grads[key] = pg if acc is None else acc + pg


def record(tape, data, parents, bwd):
    """Create an op output. Backward wiring is kept only on recording tapes."""
    if tape.record:
        v = Var(data, tape, parents, bwd)
        tape.nodes.append(v)
    else:
        v = Var(data, tape)
    return v


def _wrap(tape, obj):
    if isinstance(obj, Var):
        return obj
    return tape.const(obj)


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b):
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return record(a.tape, a.data + b.data, (a, b), bwd)


def sub(a, b):
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _unbroadcast(g, ash), _unbroadcast(-g, bsh)

    return record(a.tape, a.data - b.data, (a, b), bwd)


def neg(a):
    return record(a.tape, -a.data, (a,), lambda g: (-g,))


def mul(a, b):
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return record(a.tape, ad * bd, (a, b), bwd)


def div(a, b):
    ad, bd = a.data, b.data

    def bwd(g):
        return (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        )

    return record(a.tape, ad / bd, (a, b), bwd)


def pow_const(a, p):
    """a ** p for a constant exponent p != 0."""
    ad = a.data

    def bwd(g):
        return (g * p * ad ** (p - 1),)

    return record(a.tape, ad ** p, (a,), bwd)


def sqrt(a):
    y = np.sqrt(a.data)

    def bwd(g):
        return (g * 0.5 / y,)

    return record(a.tape, y, (a,), bwd)


def exp(a):
    y = np.exp(a.data)
    return record(a.tape, y, (a,), lambda g: (g * y,))


def log(a):
    ad = a.data
    return record(a.tape, np.log(ad), (a,), lambda g: (g / ad,))


def relu(a):
    mask = a.data > 0
    y = np.where(mask, a.data, 0)

    def bwd(g):
        return (np.where(mask, g, 0),)

    return record(a.tape, y, (a,), bwd)


# ---------------------------------------------------------------------------
# shape and reduction ops


def reshape(a, shape):
    old = a.data.shape
    return record(
        a.tape, a.data.reshape(shape), (a,), lambda g: (g.reshape(old),)
    )


def transpose(a, axes):
    inv = tuple(int(i) for i in np.argsort(axes))

    def bwd(g):
        return (np.ascontiguousarray(g.transpose(inv)),)

    return record(
        a.tape, np.ascontiguousarray(a.data.transpose(axes)), (a,), bwd
    )


def sum_(a, axis=None, keepdims=False):
    ad = a.data
    y = ad.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            gg = np.expand_dims(gg, axes)
        return (np.broadcast_to(gg, ad.shape).copy(),)

    return record(a.tape, y, (a,), bwd)


def mean(a, axis=None, keepdims=False):
    ad = a.data
    y = ad.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = ad.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= ad.shape[ax]

    def bwd(g):
        gg = np.asarray(g) / count
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            gg = np.expand_dims(gg, axes)
        return (np.broadcast_to(gg, ad.shape).copy(),)

    return record(a.tape, y, (a,), bwd)


def matmul(a, b):
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ShapeError(
            "matmul expects [m x k] @ [k x n], got %r and %r"
            % (ad.shape, bd.shape)
        )

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return record(a.tape, ad @ bd, (a, b), bwd)


def softmax(a, axis):
    z = a.data
    y = np.exp(z - z.max(axis=axis, keepdims=True))
    y /= y.sum(axis=axis, keepdims=True)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return record(a.tape, y, (a,), bwd)


def cross_entropy_logits(logits, labels, smoothing=0.0):
    """Mean softmax cross entropy. labels: int array [B]. Returns scalar Var."""
    z = logits.data
    if z.ndim != 2:
        raise ShapeError("logits must be [B x K], got %r" % (z.shape,))
    B, K = z.shape
    labels = np.asarray(labels)
    if labels.shape != (B,):
        raise ShapeError(
            "labels shape %r does not match batch %d" % (labels.shape, B)
        )
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=1, keepdims=True)
    logp = (z - m) - np.log(s)
    target = np.full((B, K), smoothing / K, dtype=z.dtype)
    target[np.arange(B), labels] += 1.0 - smoothing
    loss = np.asarray(-(target * logp).sum() / B)

    def bwd(g):
        return (g * (e / s - target) / B,)

    return record(logits.tape, loss, (logits,), bwd)


# ---------------------------------------------------------------------------
# convolution ops


def _im2col(x, kh, kw, stride, pad):
    B, H, W, C = x.shape
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    xp = np.zeros((B, H + 2 * pad, W + 2 * pad, C), dtype=x.dtype)
    xp[:, pad : pad + H, pad : pad + W, :] = x
    cols = np.empty((B, Ho, Wo, kh, kw, C), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, :, u, v, :] = xp[
                :, u : u + stride * Ho : stride, v : v + stride * Wo : stride, :
            ]
    return cols.reshape(B * Ho * Wo, kh * kw * C), Ho, Wo


def conv2d(x, w, bias, stride, pad):
    """Dense strided convolution (cross-correlation), channel-last.

    x: [B,H,W,Cin], w: [Kh,Kw,Cin,Cout], bias: [Cout] Var or None.
    """
    xd, wd = x.data, w.data
    kh, kw, cin, cout = wd.shape
    if xd.ndim != 4 or xd.shape[3] != cin:
        raise ShapeError(
            "conv2d input %r incompatible with weight %r" % (xd.shape, wd.shape)
        )
    B, H, W, _ = xd.shape
    cols, Ho, Wo = _im2col(xd, kh, kw, stride, pad)
    w2 = wd.reshape(kh * kw * cin, cout)
    y2 = cols @ w2
    if bias is not None:
        y2 = y2 + bias.data
    y = y2.reshape(B, Ho, Wo, cout)

    def bwd(g):
        g2 = g.reshape(B * Ho * Wo, cout)
        dw = (cols.T @ g2).reshape(kh, kw, cin, cout)
        dcols = (g2 @ w2.T).reshape(B, Ho, Wo, kh, kw, cin)
        dxp = np.zeros((B, H + 2 * pad, W + 2 * pad, cin), dtype=xd.dtype)
        for u in range(kh):
            for v in range(kw):
                dxp[
                    :, u : u + stride * Ho : stride, v : v + stride * Wo : stride, :
                ] += dcols[:, :, :, u, v, :]
        dx = dxp[:, pad : pad + H, pad : pad + W, :]
        db = g2.sum(axis=0) if bias is not None else None
        return (dx, dw, db)

    parents = (x, w, bias) if bias is not None else (x, w)
    if bias is None:
        return record(x.tape, y, parents, lambda g: bwd(g)[:2])
    return record(x.tape, y, parents, bwd)


def depthwise_conv2d(x, k):
    """Per-channel same-size convolution; odd kernels only.

    x: [B,H,W,C], k: [C,Kh,Kw]. Backward for x is the same correlation with a
    flipped kernel; backward for k runs a dedicated accumulation kernel.
    """
    from ._backend import dwconv_fwd, dwconv_gradk

    xd, kd = x.data, k.data
    C, kh, kw = kd.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError("depthwise kernel must be odd, got %dx%d" % (kh, kw))
    if xd.ndim != 4 or xd.shape[3] != C:
        raise ShapeError(
            "depthwise input %r incompatible with kernel %r" % (xd.shape, kd.shape)
        )
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    y = dwconv_fwd(xd, np.ascontiguousarray(kd), ph, pw)

    def bwd(g):
        g = np.ascontiguousarray(g)
        kflip = np.ascontiguousarray(kd[:, ::-1, ::-1])
        dx = dwconv_fwd(g, kflip, ph, pw)
        dk = dwconv_gradk(np.ascontiguousarray(xd), g, kh, kw, ph, pw)
        return (dx, dk)

    return record(x.tape, y, (x, k), bwd)
