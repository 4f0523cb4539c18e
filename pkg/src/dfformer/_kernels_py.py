"""Pure numpy implementations of the hot kernels.

This is the fallback used when the compiled extension is unavailable. Both
backends perform the same arithmetic in the same order (no FMA, no fast-math
reassociation), so their outputs agree to the last bit on finite inputs.
"""

import numpy as np

NAME = "python"


def fft_pow2_inplace(a, brev, twiddles):
    """Iterative radix-2 DIT transform along the last axis, in place.

    a: (batch, n) complex array, n a power of two >= 2.
    brev: (n,) int64 bit-reversal permutation.
    twiddles: (n-1,) complex; the stage whose half-block size is h occupies
        twiddles[h-1 : 2*h-1]. The transform direction is baked into the table.

    The butterfly works on explicit real components. The complex-multiply
    ufunc may fuse its products on some CPUs; plain float multiplies and adds
    are exactly rounded everywhere, which keeps the two backends bit-identical.
    """
    n = a.shape[1]
    a[:, :] = a[:, brev]
    half = 1
    while half < n:
        w = twiddles[half - 1 : 2 * half - 1]
        wr = w.real
        wi = w.imag
        blocks = a.reshape(a.shape[0], n // (2 * half), 2 * half)
        lo = blocks[:, :, :half]
        hi = blocks[:, :, half:]
        xr = hi.real
        xi = hi.imag
        tr = xr * wr - xi * wi
        ti = xr * wi + xi * wr
        lr = lo.real
        li = lo.imag
        # hi is written first; every right-hand side lands in a fresh array
        # before assignment, so reading lo's views afterwards is safe
        hi.real = lr - tr
        hi.imag = li - ti
        lo.real = lr + tr
        lo.imag = li + ti
        half *= 2


def dwconv_fwd(x, k, ph, pw):
    """Per-channel cross-correlation with zero padding, stride 1.

    x: (B, H, W, C), k: (C, Kh, Kw) -> (B, H, W, C).
    """
    B, H, W, C = x.shape
    _, kh, kw = k.shape
    xp = np.zeros((B, H + 2 * ph, W + 2 * pw, C), dtype=x.dtype)
    xp[:, ph : ph + H, pw : pw + W, :] = x
    out = np.zeros((B, H, W, C), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            out += xp[:, u : u + H, v : v + W, :] * k[:, u, v]
    return out


def dwconv_gradk(x, g, kh, kw, ph, pw):
    """Kernel gradient of dwconv_fwd. x: input, g: output grad -> (C, Kh, Kw)."""
    B, H, W, C = x.shape
    xp = np.zeros((B, H + 2 * ph, W + 2 * pw, C), dtype=x.dtype)
    xp[:, ph : ph + H, pw : pw + W, :] = x
    dk = np.empty((C, kh, kw), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            dk[:, u, v] = (g * xp[:, u : u + H, v : v + W, :]).sum(axis=(0, 1, 2))
    return dk
