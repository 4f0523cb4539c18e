"""Analysis instruments: Fourier amplitude profiles of feature maps,
filter visualization images, and mini-batch linear CKA.

Outputs are dependency-free: CSV for profiles and CKA matrices, binary PPM
(P6) with a fixed 256-entry colormap for filter images.
"""

import numpy as np

from .errors import ContractError, ShapeError
from .spectral import fft2_full, get_plan


class SpectrumProfile:
    """Relative log amplitude along the centered spectrum's half-diagonal."""

    def __init__(self, normalized_frequency, delta_log_amplitude, layer_index):
        self.normalized_frequency = normalized_frequency
        self.delta_log_amplitude = delta_log_amplitude
        self.layer_index = layer_index


class CKAResult:
    def __init__(self, matrix, labels_a, labels_b):
        self.matrix = matrix
        self.labels_a = labels_a
        self.labels_b = labels_b


def log_amplitude_profile(features, layer_index=0):
    """Profile of [B, H, W, C] features; square maps only.

    Amplitudes are averaged over batch and channels, the spectrum is
    centered, and the log amplitude along the half-diagonal is reported
    relative to its DC value (entry 0 is exactly 0).
    """
    if features.ndim != 4:
        raise ContractError("expected [B,H,W,C], got %r" % (features.shape,))
    b, h, w, c = features.shape
    if h != w:
        raise ContractError("profile needs square maps, got %dx%d" % (h, w))
    plan = get_plan(h, w)
    z = fft2_full(np.ascontiguousarray(features.transpose(0, 3, 1, 2)), plan)
    amp = np.abs(z).mean(axis=(0, 1))
    centered = np.roll(amp, (h // 2, w // 2), axis=(0, 1))
    half = h // 2
    idx = (half + np.arange(half + 1)) % h
    diag = np.log(np.maximum(centered[idx, idx], 1e-12))
    # 1x1 maps have only the DC bin; max() keeps the frequency axis finite
    freq = np.arange(half + 1) / max(half, 1)
    return SpectrumProfile(freq, diag - diag[0], layer_index)


def visualize_filter(weight, full_width=None):
    """Map complex half-spectrum filters [H, Wh, N] to images in (0, 1).

    Amplitudes pass through log then the logistic sigmoid; the missing
    spectrum half is reconstructed by Hermitian symmetry (even widths skip
    the shared DC and Nyquist columns, odd widths skip only DC) and the
    result is rolled so DC sits at the center pixel. Without full_width the
    map is assumed square (W == H).
    """
    h, wh, n = weight.shape
    w_full = h if full_width is None else full_width
    if w_full // 2 + 1 != wh:
        raise ShapeError(
            "full width %d incompatible with half width %d" % (w_full, wh)
        )
    amp = np.abs(weight) + 1e-6
    s = 1.0 / (1.0 + np.exp(-np.log(amp)))
    out = np.empty((h, w_full, n), dtype=s.dtype)
    out[:, :wh] = s
    rr = (h - np.arange(h)) % h
    cols = w_full - np.arange(wh, w_full)
    out[:, wh:] = s[np.ix_(rr, cols)]
    return np.roll(out, (h // 2, w_full // 2), axis=(0, 1))


# ---------------------------------------------------------------------------
# mini-batch linear CKA


def _hsic1(k, l):
    """Unbiased HSIC on Gram matrices whose diagonals are already zero."""
    n = k.shape[0]
    t1 = float((k * l).sum())
    sk = float(k.sum())
    sl = float(l.sum())
    cross = float(k.sum(axis=0) @ l.sum(axis=1))
    t2 = sk * sl / ((n - 1) * (n - 2))
    t3 = 2.0 / (n - 2) * cross
    return (t1 + t2 - t3) / (n * (n - 3))


def _as_batches(acts):
    out = []
    for layer in acts:
        if isinstance(layer, np.ndarray):
            layer = [layer]
        out.append([np.asarray(b, dtype=np.float64).reshape(len(b), -1)
                    for b in layer])
    return out


def _grams(layers):
    grams = []
    for batches in layers:
        per = []
        for x in batches:
            n = x.shape[0]
            if n < 4:
                raise ContractError(
                    "unbiased HSIC needs batches of >= 4, got %d" % n
                )
            g = x @ x.T
            np.fill_diagonal(g, 0.0)
            per.append(g)
        grams.append(per)
    return grams


def linear_cka(acts_a, acts_b, labels_a=None, labels_b=None):
    """CKA matrix between two models' per-layer activations.

    Each element of acts_* is one layer: a [B, D] array or a list of such
    arrays (mini-batches). Both sides must use the same batch partition.
    """
    a = _grams(_as_batches(acts_a))
    b = _grams(_as_batches(acts_b))
    sizes_a = [tuple(g.shape[0] for g in per) for per in a]
    sizes_b = [tuple(g.shape[0] for g in per) for per in b]
    if len(set(sizes_a)) > 1 or len(set(sizes_b)) > 1 or (
        a and b and sizes_a[0] != sizes_b[0]
    ):
        raise ContractError("activation sets use different batch partitions")
    self_a = [sum(_hsic1(g, g) for g in per) for per in a]
    self_b = [sum(_hsic1(g, g) for g in per) for per in b]
    mat = np.empty((len(a), len(b)))
    for i, ga in enumerate(a):
        for j, gb in enumerate(b):
            cross = sum(_hsic1(x, y) for x, y in zip(ga, gb))
            mat[i, j] = cross / np.sqrt(self_a[i] * self_b[j])
    return CKAResult(
        mat,
        labels_a or ["layer%d" % i for i in range(len(a))],
        labels_b or ["layer%d" % j for j in range(len(b))],
    )


# ---------------------------------------------------------------------------
# artifact output

# 256-entry colormap interpolated between perceptually ordered anchors
# (dark violet -> teal -> yellow), shipped as data so images are bit-stable.
_ANCHORS = np.array([
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142),
    (38, 130, 142), (31, 158, 137), (53, 183, 121), (109, 205, 89),
    (253, 231, 37),
], dtype=np.float64)


def _build_colormap():
    pos = np.linspace(0.0, 1.0, len(_ANCHORS))
    t = np.arange(256) / 255.0
    return np.stack(
        [np.rint(np.interp(t, pos, _ANCHORS[:, c])) for c in range(3)], axis=1
    ).astype(np.uint8)


COLORMAP = _build_colormap()


def colorize(img01):
    """Scalar [0,1] image to RGB bytes through the fixed colormap."""
    idx = np.clip(np.rint(np.asarray(img01) * 255.0), 0, 255).astype(np.intp)
    return COLORMAP[idx]


def ppm_bytes(rgb):
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError("PPM wants [H,W,3] bytes, got %r" % (rgb.shape,))
    header = b"P6\n%d %d\n255\n" % (rgb.shape[1], rgb.shape[0])
    return header + rgb.tobytes()


def write_ppm(path, rgb):
    with open(path, "wb") as f:
        f.write(ppm_bytes(rgb))


def profiles_csv(profiles):
    lines = ["freq,delta_log_amp,layer"]
    for p in profiles:
        for f, v in zip(p.normalized_frequency, p.delta_log_amplitude):
            lines.append("%.10g,%.10g,%s" % (f, v, p.layer_index))
    return "\n".join(lines) + "\n"


def cka_csv(result):
    lines = ["," + ",".join(result.labels_b)]
    for i, row in enumerate(result.matrix):
        lines.append(
            result.labels_a[i] + "," + ",".join("%.10g" % v for v in row)
        )
    return "\n".join(lines) + "\n"
