"""Independent slow-path oracles for the `oracles` subcommand.

Each check recomputes the quantity under test from its definition (literal
double sums, brute-force cyclic convolution, scalar HSIC loops) and compares
against the fast implementation. Returns (name, passed, detail) rows.
"""

import numpy as np

from . import analysis
from .autograd import Tape
from .mixers import DynamicFilter, routeing_weights
from .spectral import get_plan, irfft2, naive_irfft2, naive_rfft2, rfft2


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def fft_oracle(sizes=((2, 2), (4, 4), (7, 7), (7, 5), (14, 14), (56, 56)),
               seed=11):
    rng = _rng(seed)
    worst_fwd = 0.0
    worst_rt = 0.0
    for h, w in sizes:
        x = rng.standard_normal((3, h, w))
        plan = get_plan(h, w)
        z = rfft2(x, plan)
        worst_fwd = max(worst_fwd, float(np.abs(z - naive_rfft2(x)).max()))
        worst_rt = max(worst_rt, float(np.abs(irfft2(z, plan) - x).max()))
        zi = rng.standard_normal((3, h, w // 2 + 1)) \
            + 1j * rng.standard_normal((3, h, w // 2 + 1))
        worst_fwd = max(
            worst_fwd,
            float(np.abs(irfft2(zi, plan) - naive_irfft2(zi, w)).max()),
        )
    ok = worst_fwd < 1e-10 and worst_rt < 1e-12
    return ("fft-vs-naive-dft", ok,
            "max fwd err %.3g, max round-trip err %.3g" % (worst_fwd, worst_rt))


def _cyclic_conv(x, k):
    h, w = x.shape
    out = np.zeros_like(x)
    for p in range(h):
        for q in range(w):
            acc = 0.0
            for a in range(h):
                for b in range(w):
                    acc += x[a, b] * k[(p - a) % h, (q - b) % w]
            out[p, q] = acc
    return out


def convolution_oracle(sizes=((7, 7), (8, 8)), trials=20, seed=12):
    rng = _rng(seed)
    worst = 0.0
    for h, w in sizes:
        plan = get_plan(h, w)
        for _ in range(trials):
            x = rng.standard_normal((h, w))
            k = rng.standard_normal((h, w))
            got = irfft2(rfft2(x, plan) * rfft2(k, plan), plan) * np.sqrt(h * w)
            worst = max(worst, float(np.abs(got - _cyclic_conv(x, k)).max()))
    ok = worst < 1e-10
    return ("spectral-gate-vs-cyclic-conv", ok, "max err %.3g" % worst)


def linearity_oracle(n_filters=(1, 2, 4), seeds=range(10), extent=8, dim=6):
    """Combined-filter forward vs coefficient-weighted per-filter sum."""
    worst = 0.0
    for n in n_filters:
        for seed in seeds:
            rng = _rng(1000 + 97 * n + seed)
            mixer = DynamicFilter(dim, extent, extent, rng, n_filters=n)
            x = rng.standard_normal((2, extent, extent, dim))
            tape = Tape(record=False)
            out = mixer(tape.const(x)).data
            # decomposition path: gate with each basis filter separately
            xv = tape.const(x)
            lam = routeing_weights(xv, mixer.routeing).data
            y = mixer.act(mixer.pw1(xv)).data
            plan = get_plan(extent, extent)
            spec = rfft2(np.ascontiguousarray(y.transpose(0, 3, 1, 2)), plan)
            acc = np.zeros((2, dim * 2, extent, extent))
            for i in range(n):
                gated = irfft2(spec * mixer.basis.weights.value[:, :, i], plan)
                acc += lam[:, i, :][:, :, None, None] * gated
            ref = acc.transpose(0, 2, 3, 1) @ mixer.pw2.weight.value
            worst = max(worst, float(np.abs(out - ref).max()))
    ok = worst < 1e-10
    return ("dynamic-filter-linearity", ok, "max err %.3g" % worst)


def _hsic_scalar(x, y):
    """Literal unbiased HSIC with zeroed-diagonal Grams, scalar loops."""
    n = x.shape[0]
    k = x @ x.T
    l = y @ y.T
    for i in range(n):
        k[i, i] = 0.0
        l[i, i] = 0.0
    t1 = sum(k[i, j] * l[j, i] for i in range(n) for j in range(n))
    t2 = k.sum() * l.sum() / ((n - 1) * (n - 2))
    t3 = sum(
        k[i, j] * l[j, m] for i in range(n) for j in range(n) for m in range(n)
    ) * 2.0 / (n - 2)
    return (t1 + t2 - t3) / (n * (n - 3))


def cka_oracle(seed=13):
    rng = _rng(seed)
    x = rng.standard_normal((8, 3))
    y = rng.standard_normal((8, 3))
    want = _hsic_scalar(x, y) / np.sqrt(
        _hsic_scalar(x, x) * _hsic_scalar(y, y)
    )
    got = analysis.linear_cka([x], [y]).matrix[0, 0]
    err = abs(got - want)
    return ("cka-vs-scalar-hsic", err < 1e-10, "err %.3g" % err)


def run_all():
    return [fft_oracle(), convolution_oracle(), linearity_oracle(),
            cka_oracle()]
