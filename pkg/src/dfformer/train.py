"""Training: AdamW with decoupled decay, warmup + cosine schedule, and a
deterministic desk-scale training loop.

Complex parameters are optimized as interleaved (re, im) float pairs so the
moment estimates are elementwise over real numbers.
"""

import math

import numpy as np

from . import autograd as ag
from .autograd import Tape


class TrainConfig:
    def __init__(self, lr=1e-3, weight_decay=0.05, beta1=0.9, beta2=0.999,
                 eps=1e-8, epochs=30, warmup_epochs=2, batch_size=64,
                 label_smoothing=0.0, min_lr=1e-6, warmup_floor=1e-6):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.batch_size = batch_size
        self.label_smoothing = label_smoothing
        self.min_lr = min_lr
        self.warmup_floor = warmup_floor

    @classmethod
    def from_flat(cls, train_section):
        from .config import _TRAIN_KEYS
        from .errors import ConfigError

        for key in train_section:
            if key not in _TRAIN_KEYS:
                raise ConfigError("unknown key train.%s" % key)
        return cls(**train_section)


def _real_view(arr):
    """Float view of an array; complex becomes interleaved (re, im)."""
    if np.iscomplexobj(arr):
        return arr.view(np.float32 if arr.dtype == np.complex64 else np.float64)
    return arr


class AdamW:
    """Decoupled weight decay: p <- p - lr*wd*p - lr*mhat/(sqrt(vhat)+eps).

    Decay applies only to parameters of rank >= 2 (weights and filters);
    norm affines, biases, and scalar activations decay-free.
    """

    def __init__(self, params, cfg):
        self.params = list(params)
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(_real_view(p.value)) for p in self.params]
        self.v = [np.zeros_like(_real_view(p.value)) for p in self.params]

    def step(self, lr):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = _real_view(p.grad)
            pv = _real_view(p.value)
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            if cfg.weight_decay != 0.0 and p.value.ndim >= 2:
                pv -= lr * cfg.weight_decay * pv
            pv -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def lr_at(step, warmup_steps, total_steps, cfg):
    """Linear warmup from the floor, then cosine decay to min_lr."""
    if warmup_steps > 0 and step < warmup_steps:
        return cfg.warmup_floor + (cfg.lr - cfg.warmup_floor) * (
            step / warmup_steps
        )
    span = max(1, total_steps - warmup_steps)
    prog = (step - warmup_steps) / span
    return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (
        1.0 + math.cos(math.pi * prog)
    )


def seed_streams(master_seed):
    """Fan one master seed out to independent counter-based streams."""
    children = np.random.SeedSequence(master_seed).spawn(4)
    names = ("data", "init", "shuffle", "droppath")
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(names, children)
    }


def run_epoch(model, opt, images, labels, cfg, perm, step0, warmup_steps,
              total_steps, drop_rng=None):
    """One pass over the data in `perm` order; returns (loss, acc, steps)."""
    n = len(labels)
    bs = cfg.batch_size
    loss_sum = 0.0
    hits = 0
    steps = 0
    for lo in range(0, n, bs):
        idx = perm[lo : lo + bs]
        tape = Tape()
        logits = model.forward(images[idx], tape, drop_rng=drop_rng)
        loss = ag.cross_entropy_logits(logits, labels[idx],
                                       cfg.label_smoothing)
        model.zero_grad()
        tape.backward(loss)
        opt.step(lr_at(step0 + steps, warmup_steps, total_steps, cfg))
        loss_sum += float(loss.data) * len(idx)
        hits += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        steps += 1
    return loss_sum / n, hits / n, steps


def train(model, images, labels, cfg, shuffle_rng, drop_rng=None,
          log=None):
    """Full deterministic training run; returns per-epoch history."""
    n = len(labels)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total = cfg.epochs * steps_per_epoch
    warm = cfg.warmup_epochs * steps_per_epoch
    opt = AdamW(model.parameters(), cfg)
    history = {"loss": [], "acc": []}
    step = 0
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        loss, acc, steps = run_epoch(
            model, opt, images, labels, cfg, perm, step, warm, total,
            drop_rng,
        )
        step += steps
        history["loss"].append(loss)
        history["acc"].append(acc)
        if log is not None:
            log("epoch %3d  loss %.4f  acc %.4f" % (epoch, loss, acc))
    return history


def evaluate(model, images, labels, batch_size=64):
    hits = 0
    for lo in range(0, len(labels), batch_size):
        sel = slice(lo, lo + batch_size)
        logits = model.logits(images[sel])
        hits += int((logits.argmax(axis=1) == labels[sel]).sum())
    return hits / len(labels)
