"""Datasets: a synthetic frequency-classification task and IDX loading.

The synthetic task labels images by which frequency band carries their
sinusoid. Each class owns a small set of carrier bands and every example
draws one of them at random, so the best filter depends on the input; a
static spectral filter can only pass the union of bands.
"""

import struct

import numpy as np

from .errors import DataCountError, DataMagicError, DataTruncatedError

# Per-class carrier bands (fy, fx) on the default 32-grid: well separated
# rings, two orientations per class.
DEFAULT_BANDS = (
    ((2, 3), (3, 2)),
    ((5, 6), (6, 5)),
    ((8, 9), (9, 8)),
    ((11, 12), (12, 11)),
)


class SyntheticSpec:
    def __init__(self, seed, grid=32, classes=4, per_class=128, noise=0.3,
                 bands=DEFAULT_BANDS, amplitude=1.0):
        if classes > len(bands):
            raise ValueError(
                "need bands for %d classes, have %d" % (classes, len(bands))
            )
        self.seed = seed
        self.grid = grid
        self.classes = classes
        self.per_class = per_class
        self.noise = noise
        self.bands = bands
        self.amplitude = amplitude


def gen_synthetic(spec):
    """Class-major generation; bitwise deterministic for a given spec."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    g = spec.grid
    n = spec.classes * spec.per_class
    yy, xx = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    images = np.empty((n, g, g, 3), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    i = 0
    for c in range(spec.classes):
        bands = spec.bands[c]
        for _ in range(spec.per_class):
            fy, fx = bands[rng.integers(len(bands))]
            phase = rng.uniform(0.0, 2.0 * np.pi)
            base = spec.amplitude * np.cos(
                2.0 * np.pi * (fy * yy + fx * xx) / g + phase
            )
            if spec.noise > 0.0:
                base = base + spec.noise * rng.standard_normal((g, g))
            images[i] = base[:, :, None]
            labels[i] = c
            i += 1
    return images, labels


# ---------------------------------------------------------------------------
# IDX (big-endian) image/label files

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise DataTruncatedError("truncated while reading %s" % what)
    return buf


def load_idx(images_path, labels_path, target=None):
    """Read IDX image/label files; scale to [0,1], 3 channels, optional
    nearest-neighbour resize to a square target extent."""
    with open(images_path, "rb") as f:
        magic, n, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, "image header")
        )
        if magic != IDX_IMAGES_MAGIC:
            raise DataMagicError(
                "image magic %d, expected %d" % (magic, IDX_IMAGES_MAGIC)
            )
        raw = _read_exact(f, n * rows * cols, "image payload")
    with open(labels_path, "rb") as f:
        magic, nl = struct.unpack(">II", _read_exact(f, 8, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise DataMagicError(
                "label magic %d, expected %d" % (magic, IDX_LABELS_MAGIC)
            )
        if nl != n:
            raise DataCountError("%d images but %d labels" % (n, nl))
        labels = np.frombuffer(
            _read_exact(f, n, "label payload"), dtype=np.uint8
        ).astype(np.int64)
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)
    images = images.astype(np.float64) / 255.0
    if target is not None and (rows, cols) != (target, target):
        ri = (np.arange(target) * rows) // target
        ci = (np.arange(target) * cols) // target
        images = images[:, ri][:, :, ci]
    return np.repeat(images[:, :, :, None], 3, axis=3), labels
