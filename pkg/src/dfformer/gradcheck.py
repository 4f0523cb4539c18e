"""Finite-difference gradient verification.

Central differences at 64-bit, step 1e-5, compared against tape gradients
with relative error floored at max(1, |fd|, |analytic|). Complex parameters
are probed on their interleaved (re, im) float view, which is exactly the
convention the tape's complex gradients use.
"""

import numpy as np

from . import autograd as ag
from .autograd import Tape

STEP = 1e-5
TOL = 1e-5


def _real_flat(arr):
    if np.iscomplexobj(arr):
        arr = arr.view(np.float32 if arr.dtype == np.complex64 else np.float64)
    return arr.reshape(-1)


def check_params(loss_fn, named_params, rng, samples=6, step=STEP):
    """Probe sampled elements of each parameter; returns (worst, rows).

    loss_fn recomputes the scalar loss from current parameter values;
    named_params is [(name, Parameter)] with .grad already populated by one
    recorded backward pass.
    """
    worst = 0.0
    rows = []
    for name, p in named_params:
        flat = _real_flat(p.value)
        grad = _real_flat(p.grad)
        k = min(samples, flat.size)
        idx = rng.choice(flat.size, size=k, replace=False) if k < flat.size \
            else np.arange(flat.size)
        err = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + step
            lp = loss_fn()
            flat[i] = old - step
            lm = loss_fn()
            flat[i] = old
            fd = (lp - lm) / (2.0 * step)
            g = grad[i]
            err = max(err, abs(fd - g) / max(1.0, abs(fd), abs(g)))
        rows.append((name, err))
        worst = max(worst, err)
    return worst, rows


def check_module(module, x, rng, samples=6, step=STEP, reduce_weights=None):
    """Check one module's parameter and input gradients on input x.

    The loss is a fixed random weighting of the output so every output
    element influences it.
    """
    tape = Tape()
    xs = ag.Parameter(np.array(x, dtype=np.float64))
    weights = reduce_weights
    if weights is None:
        probe = module(Tape(record=False).const(x))
        weights = rng.standard_normal(probe.data.shape)

    def run(t):
        out = module(t.watch(xs))
        return ag.sum_(ag.mul(out, t.const(weights)))

    loss = run(tape)
    module.zero_grad()
    xs.grad[...] = 0
    tape.backward(loss)

    def loss_fn():
        return float(run(Tape(record=False)).data)

    named = [("input", xs)] + module.named_parameters()
    return check_params(loss_fn, named, rng, samples, step)


def check_model(model, images, labels, rng, samples=4, step=STEP):
    """Full-model check: cross-entropy loss, every parameter sampled."""
    tape = Tape()
    loss = ag.cross_entropy_logits(
        model.forward(images, tape), labels, 0.0
    )
    model.zero_grad()
    tape.backward(loss)

    def loss_fn():
        t = Tape(record=False)
        out = ag.cross_entropy_logits(model.forward(images, t), labels, 0.0)
        return float(out.data)

    return check_params(loss_fn, model.named_parameters(), rng, samples, step)
