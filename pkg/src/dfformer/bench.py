"""Forward-timing benchmark across resolutions, plus a kernel-backend
comparison (compiled extension vs pure Python).

Timing rows carry the analytic MAC count and a resident-bytes estimate
(parameters plus the largest single stage's working set); wall times are
medians over repeats on a single worker.
"""

import time

import numpy as np

from ._backend import BACKEND, get_backend
from .errors import DfformerError
from .model import build_model, count_flops, count_params, get_config
from .spectral import get_plan


def _activation_bytes(cfg, resolution, batch, itemsize=8):
    peak = 0
    for i, st in enumerate(cfg.stages):
        e = resolution >> (2 + i)
        med = 2 * st.width
        if st.mixer in ("df", "gf"):
            spectral = e * (e // 2 + 1) * med * 2 * itemsize * 2
            stage = e * e * med * itemsize * 2 + spectral
        elif st.mixer == "attention":
            heads = max(1, st.width // 32)
            stage = heads * (e * e) ** 2 * itemsize + e * e * 3 * st.width * itemsize
        else:
            stage = e * e * med * itemsize * 3
        peak = max(peak, batch * stage)
    return peak


def bench_rows(names, resolutions, batch=2, repeats=5, seed=0,
               dtype=np.float64, num_classes=10, errors=None):
    """One (model, resolution, sec/img, macs, est_bytes) row per pair.

    Rows that cannot be built (bad stride pyramid) are reported through the
    errors callback and skipped; the run continues.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    rows = []
    for name in names:
        for res in resolutions:
            try:
                cfg = get_config(name, input_size=res, num_classes=num_classes)
                model = build_model(cfg, rng, dtype)
            except DfformerError as e:
                if errors is not None:
                    errors("%s@%d: %s" % (name, res, e))
                continue
            x = rng.standard_normal((batch, res, res, 3)).astype(dtype)
            model.logits(x)  # warm caches and plans
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                model.logits(x)
                times.append(time.perf_counter() - t0)
            sec = float(np.median(times)) / batch
            macs = count_flops(cfg, res)[0]
            est = count_params(model) * np.dtype(dtype).itemsize \
                + _activation_bytes(cfg, res, batch, np.dtype(dtype).itemsize)
            rows.append((name, res, sec, macs, est))
    return rows


def bench_csv(rows):
    lines = ["model,resolution,seconds_per_image,macs,est_bytes"]
    for name, res, sec, macs, est in rows:
        lines.append("%s,%d,%.6g,%d,%d" % (name, res, sec, macs, est))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# kernel backend comparison


def bench_kernels(sizes=(64, 128, 256), repeats=5, seed=0):
    """Compare compiled and Python kernels on the FFT and depthwise ops.

    Returns (backend, op, size, seconds) rows; falls back to whatever
    backends import (the compiled one may be absent).
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    rows = []
    for bname in ("compiled", "python"):
        try:
            mod = get_backend(bname)
        except ImportError:
            continue
        for n in sizes:
            if n & (n - 1):
                continue  # kernel-level timing targets the radix-2 path
            plan = get_plan(n, n)
            a = (rng.standard_normal((8, n)) + 1j * rng.standard_normal((8, n)))
            ap = plan.axis_w
            times = []
            for _ in range(repeats):
                buf = a.copy()
                t0 = time.perf_counter()
                mod.fft_pow2_inplace(buf, ap.brev, ap.tw[-1])
                times.append(time.perf_counter() - t0)
            rows.append((bname, "fft", n, float(np.median(times))))
            x = rng.standard_normal((2, n, n, 8))
            k = rng.standard_normal((8, 7, 7))
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                mod.dwconv_fwd(x, k, 3, 3)
                times.append(time.perf_counter() - t0)
            rows.append((bname, "dwconv", n, float(np.median(times))))
    return rows


def kernels_csv(rows):
    lines = ["backend,op,size,seconds"]
    for b, op, n, sec in rows:
        lines.append("%s,%s,%d,%.6g" % (b, op, n, sec))
    return "\n".join(lines) + "\n"


def active_backend():
    return BACKEND
