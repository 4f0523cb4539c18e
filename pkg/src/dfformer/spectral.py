"""Orthonormal 2D real FFT with cached plans, plus naive-DFT oracles.

Forward transform (half spectrum, w' <= W//2):

    X[h', w'] = (HW)^(-1/2) * sum_{h,w} x[h, w] * exp(-2j*pi*(h*h'/H + w*w'/W))

Power-of-two axis lengths run on an iterative radix-2 kernel; every other
length goes through Bluestein's chirp-z embedding in a power-of-two size, so
all extents are computed exactly. Plans precompute bit-reversal permutations
and twiddle tables once per (H, W) and are safe to share across threads.

Convolution-theorem normalization: with the orthonormal scaling above,

    irfft2(rfft2(x) * rfft2(k)) * sqrt(H*W) == cyclic_convolution(x, k)

The sqrt(HW) factor compensates the 1/sqrt(HW) applied in each direction
(three transforms contribute (HW)^(-3/2); a cyclic convolution carries
(HW)^(-1) overall, leaving sqrt(HW) to restore).
"""

import math
import threading
from contextlib import contextmanager

import numpy as np

from ._backend import fft_pow2_inplace
from .autograd import Var, record
from .errors import ContractError, PlanError


def _bit_reverse_perm(n):
    bits = n.bit_length() - 1
    perm = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        perm[i] = (perm[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    return perm


def _twiddle_table(n, sign):
    """Flat per-stage twiddle table of length n-1.

    Stage with half-block size h occupies [h-1 : 2h-1] and holds
    exp(sign * 1j * pi * t / h) for t in [0, h).
    """
    out = np.empty(n - 1, dtype=np.complex128)
    half = 1
    while half < n:
        t = np.arange(half)
        out[half - 1 : 2 * half - 1] = np.exp(sign * 1j * np.pi * t / half)
        half *= 2
    return out


class _AxisPlan:
    """Precomputed state for one transform axis of length n."""

    def __init__(self, n):
        self.n = n
        self.pow2 = n & (n - 1) == 0
        self._casts = {}
        if n == 1:
            return
        if self.pow2:
            self.brev = _bit_reverse_perm(n)
            self.tw = {-1: _twiddle_table(n, -1.0), +1: _twiddle_table(n, +1.0)}
        else:
            m = 1 << (2 * n - 1).bit_length()
            self.m = m
            self.mbrev = _bit_reverse_perm(m)
            self.mtw = {-1: _twiddle_table(m, -1.0), +1: _twiddle_table(m, +1.0)}
            k = np.arange(n)
            kk = (k * k) % (2 * n)  # exp has period 2n in k^2, reduce for accuracy
            self.chirp = {}
            self.chirp_out = {}
            self.bspec = {}
            for sign in (-1, +1):
                w = np.exp(sign * 1j * np.pi * kk / n)
                b = np.zeros(m, dtype=np.complex128)
                b[:n] = np.conj(w)
                b[m - n + 1 :] = np.conj(w)[1:][::-1]
                bf = b.reshape(1, m).copy()
                fft_pow2_inplace(bf, self.mbrev, self.mtw[-1])
                self.chirp[sign] = w
                self.chirp_out[sign] = w / m  # folds the 1/m of the inverse FFT
                self.bspec[sign] = bf[0]

    def cast(self, arr, dtype):
        """Table cast cache so float32 runs use complex64 twiddles."""
        if dtype == np.complex128:
            return arr
        key = id(arr)
        got = self._casts.get(key)
        if got is None:
            got = arr.astype(dtype)
            self._casts[key] = got
        return got


class SpectralPlan:
    """Transform plan for a fixed (H, W); immutable once built."""

    def __init__(self, H, W):
        if H < 1 or W < 1:
            raise PlanError("plan extents must be positive, got (%d, %d)" % (H, W))
        self.H = H
        self.W = W
        self.Wh = W // 2 + 1
        self.scale = 1.0 / math.sqrt(H * W)
        self.axis_h = _AxisPlan(H)
        self.axis_w = _AxisPlan(W)
        # multiplicity of each stored column in the full spectrum: columns
        # 1..W-Wh have a conjugate mirror, DC (and Nyquist for even W) do not
        mult = np.ones(self.Wh)
        mult[1 : W - self.Wh + 1] = 2.0
        self.multiplicity = mult


_PLANS = {}
_PLAN_LOCK = threading.Lock()


def get_plan(H, W):
    key = (H, W)
    plan = _PLANS.get(key)
    if plan is None:
        with _PLAN_LOCK:
            plan = _PLANS.get(key)
            if plan is None:
                plan = SpectralPlan(H, W)
                _PLANS[key] = plan
    return plan


# ---------------------------------------------------------------------------
# operation counting (used by the complexity-scaling property checks)


class _OpCounter:
    def __init__(self):
        self.active = False
        self.cmults = 0


_COUNTER = _OpCounter()


@contextmanager
def count_spectral_ops():
    """Tally complex multiplies dispatched by the transform kernels."""
    prev = (_COUNTER.active, _COUNTER.cmults)
    _COUNTER.active = True
    _COUNTER.cmults = 0
    try:
        yield _COUNTER
    finally:
        _COUNTER.active, _COUNTER.cmults = prev


def _tally(batch, ap):
    if ap.n == 1:
        return
    if ap.pow2:
        lg = ap.n.bit_length() - 1
        _COUNTER.cmults += batch * (ap.n // 2) * lg
    else:
        lg = ap.m.bit_length() - 1
        _COUNTER.cmults += batch * (2 * (ap.m // 2) * lg + ap.m + 2 * ap.n)


# ---------------------------------------------------------------------------
# 1D driver


def _cfft(a, ap, inverse, own=False):
    """Complex transform along the last axis of a (batch, n) array.

    Unnormalized in both directions; the 2D drivers apply 1/sqrt(HW) per
    direction. Returns a new array unless own=True lets it reuse a.
    """
    n = ap.n
    if _COUNTER.active:
        _tally(a.shape[0], ap)
    if n == 1:
        return a if own else a.copy()
    sign = +1 if inverse else -1
    if ap.pow2:
        if own and a.flags.c_contiguous:
            out = a
        else:
            out = np.array(a, order="C")
        fft_pow2_inplace(out, ap.brev, ap.cast(ap.tw[sign], out.dtype))
        return out
    w = ap.cast(ap.chirp[sign], a.dtype)
    wout = ap.cast(ap.chirp_out[sign], a.dtype)
    bf = ap.cast(ap.bspec[sign], a.dtype)
    A = np.zeros((a.shape[0], ap.m), dtype=a.dtype)
    A[:, :n] = a * w
    fft_pow2_inplace(A, ap.mbrev, ap.cast(ap.mtw[-1], a.dtype))
    A *= bf
    fft_pow2_inplace(A, ap.mbrev, ap.cast(ap.mtw[+1], a.dtype))
    return A[:, :n] * wout


# ---------------------------------------------------------------------------
# 2D transforms


def _complex_dtype(real_dtype):
    return np.complex64 if real_dtype == np.float32 else np.complex128


def _check_trailing(x, plan, want_half):
    exp = (plan.H, plan.Wh if want_half else plan.W)
    if x.ndim < 2 or x.shape[-2:] != exp:
        raise PlanError(
            "trailing dims %r do not match plan %r" % (x.shape[-2:], exp)
        )


def rfft2(x, plan):
    """Real 2D forward transform to the Hermitian half spectrum."""
    x = np.asarray(x)
    _check_trailing(x, plan, want_half=False)
    lead = x.shape[:-2]
    H, W, Wh = plan.H, plan.W, plan.Wh
    z = x.reshape(-1, W).astype(_complex_dtype(x.dtype))
    z = _cfft(z, plan.axis_w, inverse=False, own=True)
    z = z.reshape(-1, H, W)[:, :, :Wh]
    zt = np.ascontiguousarray(z.transpose(0, 2, 1)).reshape(-1, H)
    zt = _cfft(zt, plan.axis_h, inverse=False, own=True)
    out = zt.reshape(-1, Wh, H).transpose(0, 2, 1) * plan.scale
    return out.reshape(lead + (H, Wh))


def irfft2(Z, plan):
    """Inverse of rfft2. The stored half is authoritative: redundant bins are
    reconstructed from it by conjugate symmetry, so the input need not be
    Hermitian-consistent."""
    Z = np.asarray(Z)
    _check_trailing(Z, plan, want_half=True)
    lead = Z.shape[:-2]
    H, W, Wh = plan.H, plan.W, plan.Wh
    z = Z.reshape(-1, H, Wh)
    zt = np.ascontiguousarray(z.transpose(0, 2, 1)).reshape(-1, H)
    zt = _cfft(zt, plan.axis_h, inverse=True, own=True)
    z2 = zt.reshape(-1, Wh, H).transpose(0, 2, 1)
    full = np.empty((z2.shape[0], H, W), dtype=z2.dtype)
    full[:, :, :Wh] = z2
    if W - Wh > 0:
        full[:, :, Wh:] = np.conj(z2[:, :, 1 : W - Wh + 1][:, :, ::-1])
    rows = _cfft(full.reshape(-1, W), plan.axis_w, inverse=True, own=True)
    out = rows.real.reshape(-1, H, W) * plan.scale
    return out.reshape(lead + (H, W))


def fft2_full(x, plan):
    """Full-width orthonormal 2D transform (complex output), used by the
    spectrum-profile analysis which needs the centered full spectrum."""
    x = np.asarray(x)
    if x.shape[-2:] != (plan.H, plan.W):
        raise PlanError(
            "trailing dims %r do not match plan %r"
            % (x.shape[-2:], (plan.H, plan.W))
        )
    H, W = plan.H, plan.W
    lead = x.shape[:-2]
    z = x.reshape(-1, W).astype(
        _complex_dtype(x.dtype) if not np.iscomplexobj(x) else x.dtype
    )
    z = _cfft(z, plan.axis_w, inverse=False, own=True)
    zt = np.ascontiguousarray(z.reshape(-1, H, W).transpose(0, 2, 1)).reshape(-1, H)
    zt = _cfft(zt, plan.axis_h, inverse=False, own=True)
    out = zt.reshape(-1, W, H).transpose(0, 2, 1) * plan.scale
    return out.reshape(lead + (H, W))


def _ifft2_full(Z, plan):
    """Orthonormal full-width complex inverse, used by the rfft2 backward."""
    H, W = plan.H, plan.W
    lead = Z.shape[:-2]
    z = Z.reshape(-1, H, W)
    zt = np.ascontiguousarray(z.transpose(0, 2, 1)).reshape(-1, H)
    zt = _cfft(zt, plan.axis_h, inverse=True, own=True)
    z2 = np.ascontiguousarray(zt.reshape(-1, W, H).transpose(0, 2, 1))
    rows = _cfft(z2.reshape(-1, W), plan.axis_w, inverse=True, own=True)
    return rows.reshape(lead + (H, W)) * plan.scale


def rfft2_backward(g, plan):
    """Adjoint of rfft2 under the (re, im) pair convention.

    Zero-pad the half-spectrum cotangent to full width, apply the orthonormal
    full inverse, keep the real part.
    """
    lead = g.shape[:-2]
    gf = np.zeros(lead + (plan.H, plan.W), dtype=g.dtype)
    gf[..., : plan.Wh] = g
    return np.ascontiguousarray(_ifft2_full(gf, plan).real)


def irfft2_backward(g, plan):
    """Adjoint of irfft2: forward transform of the real cotangent with the
    mirrored columns doubled (they receive two copies of each stored bin)."""
    return rfft2(g, plan) * plan.multiplicity


# ---------------------------------------------------------------------------
# naive O((HW)^2) oracles: literal double sums via the full phase matrix


def _phase_matrix(H, W, sign):
    h = np.arange(H)
    w = np.arange(W)
    ph = np.exp(sign * 2j * np.pi * np.outer(h, h) / H)
    pw = np.exp(sign * 2j * np.pi * np.outer(w, w) / W)
    return np.kron(ph, pw)  # rows: (h', w'), cols: (h, w)


def naive_rfft2(x):
    """Direct evaluation of the defining double sum, one output bin at a time
    (as a (HW)x(HW) phase-matrix product). Independent of the fast path."""
    x = np.asarray(x, dtype=np.float64)
    lead = x.shape[:-2]
    H, W = x.shape[-2:]
    P = _phase_matrix(H, W, -1)
    flat = x.reshape(-1, H * W)
    full = flat @ P.T / math.sqrt(H * W)
    return full.reshape(lead + (H, W))[..., : W // 2 + 1]

def naive_irfft2(Z, W):
    """Direct inverse: explicitly materialize the 2D Hermitian extension
    (stored half authoritative), apply the full inverse double sum, and take
    the real part."""
    Z = np.asarray(Z, dtype=np.complex128)
    lead = Z.shape[:-2]
    H, Wh = Z.shape[-2:]
    z = Z.reshape(-1, H, Wh)
    full = np.empty((z.shape[0], H, W), dtype=np.complex128)
    full[:, :, :Wh] = z
    hh = (H - np.arange(H)) % H
    for w in range(Wh, W):
        full[:, :, w] = np.conj(z[:, hh, W - w])
    P = _phase_matrix(H, W, +1)
    out = full.reshape(-1, H * W) @ P.T / math.sqrt(H * W)
    return out.real.reshape(lead + (H, W))


# ---------------------------------------------------------------------------
# tape ops


def rfft2_var(x, plan):
    if not isinstance(x, Var):
        raise ContractError("rfft2_var expects a tape variable")
    data = rfft2(x.data, plan)

    def bwd(g):
        return (rfft2_backward(g, plan),)

    return record(x.tape, data, (x,), bwd)


def irfft2_var(Z, plan):
    data = irfft2(Z.data, plan)

    def bwd(g):
        return (irfft2_backward(g, plan),)

    return record(Z.tape, data, (Z,), bwd)


def cmul(a, b):
    """Elementwise complex product with numpy broadcasting."""
    from .autograd import _unbroadcast

    data = a.data * b.data
    ad, bd = a.data, b.data
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return (
            _unbroadcast(g * np.conj(bd), ash),
            _unbroadcast(g * np.conj(ad), bsh),
        )

    return record(a.tape, data, (a, b), bwd)


def combine_filters(r, K):
    """Per-sample filters from routeing coefficients and a shared basis.

    r: real (B, N, C') coefficients; K: complex (H, Wh, N) basis.
    Returns complex (B, C', H, Wh): weight[b,c,h,w] = sum_n r[b,n,c]*K[h,w,n].
    """
    rd = r.data.astype(K.data.dtype)
    Kd = K.data
    data = np.einsum("bnc,hwn->bchw", rd, Kd)

    def bwd(g):
        gr = np.einsum("bchw,hwn->bnc", np.conj(g), Kd).real
        gK = np.einsum("bchw,bnc->hwn", g, rd)
        return (gr.astype(r.data.dtype), gK)

    return record(r.tape, data, (r, K), bwd)
