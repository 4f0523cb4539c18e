# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core: radix-2 butterflies and depthwise-conv loops.

Mirrors _kernels_py arithmetic exactly (explicit real-component butterflies,
same operation order, no contraction), so the two backends agree bitwise on
finite input.
"""

import numpy as np

cimport numpy as cnp

NAME = "compiled"

ctypedef fused real_t:
    float
    double


def _fft_rows(real_t[:, ::1] af, cnp.int64_t[::1] brev, real_t[::1] tw,
              real_t[::1] scr):
    """Butterfly loops over interleaved re/im rows. af: (batch, 2n) floats."""
    cdef Py_ssize_t batch = af.shape[0]
    cdef Py_ssize_t n = af.shape[1] // 2
    cdef Py_ssize_t b, i, t, half, base, bs, ilo, ihi
    cdef real_t wr, wi, xr, xi, tr, ti, lr, li
    for b in range(batch):
        for i in range(n):
            scr[2 * i] = af[b, 2 * brev[i]]
            scr[2 * i + 1] = af[b, 2 * brev[i] + 1]
        for i in range(2 * n):
            af[b, i] = scr[i]
        half = 1
        while half < n:
            base = half - 1
            bs = 0
            while bs < n:
                for t in range(half):
                    wr = tw[2 * (base + t)]
                    wi = tw[2 * (base + t) + 1]
                    ihi = 2 * (bs + half + t)
                    ilo = 2 * (bs + t)
                    xr = af[b, ihi]
                    xi = af[b, ihi + 1]
                    tr = xr * wr - xi * wi
                    ti = xr * wi + xi * wr
                    lr = af[b, ilo]
                    li = af[b, ilo + 1]
                    af[b, ihi] = lr - tr
                    af[b, ihi + 1] = li - ti
                    af[b, ilo] = lr + tr
                    af[b, ilo + 1] = li + ti
                bs += 2 * half
            half *= 2


def fft_pow2_inplace(a, brev, twiddles):
    """Radix-2 DIT transform along the last axis, in place. See _kernels_py."""
    brev64 = np.ascontiguousarray(brev, dtype=np.int64)
    if a.dtype == np.complex64:
        scr = np.empty(2 * a.shape[1], dtype=np.float32)
        _fft_rows(a.view(np.float32), brev64, twiddles.view(np.float32), scr)
    else:
        scr = np.empty(2 * a.shape[1], dtype=np.float64)
        _fft_rows(a.view(np.float64), brev64, twiddles.view(np.float64), scr)


def dwconv_fwd(real_t[:, :, :, ::1] x, real_t[:, :, ::1] k,
               Py_ssize_t ph, Py_ssize_t pw):
    """Per-channel cross-correlation with zero padding, stride 1."""
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t kh = k.shape[1], kw = k.shape[2]
    cdef Py_ssize_t b, y, xx, u, v, c, yy, xv
    if real_t is float:
        out_np = np.zeros((B, H, W, C), dtype=np.float32)
    else:
        out_np = np.zeros((B, H, W, C), dtype=np.float64)
    cdef real_t[:, :, :, ::1] out = out_np
    for u in range(kh):
        for v in range(kw):
            for b in range(B):
                for y in range(H):
                    yy = y + u - ph
                    if yy < 0 or yy >= H:
                        continue
                    for xx in range(W):
                        xv = xx + v - pw
                        if xv < 0 or xv >= W:
                            continue
                        for c in range(C):
                            out[b, y, xx, c] += x[b, yy, xv, c] * k[c, u, v]
    return out_np


def dwconv_gradk(real_t[:, :, :, ::1] x, real_t[:, :, :, ::1] g,
                 Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t ph, Py_ssize_t pw):
    """Kernel gradient of dwconv_fwd."""
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t b, y, xx, u, v, c, yy, xv
    if real_t is float:
        dk_np = np.zeros((C, kh, kw), dtype=np.float32)
    else:
        dk_np = np.zeros((C, kh, kw), dtype=np.float64)
    cdef real_t[:, :, ::1] dk = dk_np
    for u in range(kh):
        for v in range(kw):
            for b in range(B):
                for y in range(H):
                    yy = y + u - ph
                    if yy < 0 or yy >= H:
                        continue
                    for xx in range(W):
                        xv = xx + v - pw
                        if xv < 0 or xv >= W:
                            continue
                        for c in range(C):
                            dk[c, u, v] += g[b, y, xx, c] * x[b, yy, xv, c]
    return dk_np
