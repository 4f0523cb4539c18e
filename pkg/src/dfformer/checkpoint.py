"""Binary checkpoint container (DFCK).

Layout, all little-endian:

    magic   4 bytes  "DFCK"
    version u32
    count   u32
    entry*  name_len u16, name utf-8, dtype u8, rank u8, extents u32 each,
            raw payload

Dtype codes: 0 real64, 1 real32, 2 complex128 (interleaved float64 pairs),
3 complex64 (interleaved float32 pairs). Round trips are bitwise.
"""

import struct

import numpy as np

from .errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointNameError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from .mixers import resample_half_spectrum

MAGIC = b"DFCK"
VERSION = 1

_CODES = {
    np.dtype(np.float64): 0,
    np.dtype(np.float32): 1,
    np.dtype(np.complex128): 2,
    np.dtype(np.complex64): 3,
}
_DTYPES = {0: "<f8", 1: "<f4", 2: "<c16", 3: "<c8"}


def save_arrays(path, items):
    """Write name-keyed arrays; items is a list of (name, ndarray)."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            # asarray keeps rank 0; ascontiguousarray would promote it to 1
            arr = np.asarray(arr, order="C")
            if arr.dtype not in _CODES:
                raise CheckpointError(
                    "unsupported dtype %s for %r" % (arr.dtype, name)
                )
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
            for ext in arr.shape:
                f.write(struct.pack("<I", ext))
            f.write(arr.astype(_DTYPES[_CODES[arr.dtype]], copy=False).tobytes())


def save_checkpoint(model, path):
    save_arrays(path, [(n, p.value) for n, p in model.named_parameters()])


def _take(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointTruncatedError("truncated while reading %s" % what)
    return buf


def read_checkpoint(path):
    """Read a DFCK file into an ordered {name: array} dict."""
    out = {}
    with open(path, "rb") as f:
        if _take(f, 4, "magic") != MAGIC:
            raise CheckpointMagicError("not a DFCK file: %r" % path)
        version, count = struct.unpack("<II", _take(f, 8, "header"))
        if version != VERSION:
            raise CheckpointVersionError(
                "unsupported version %d (expected %d)" % (version, VERSION)
            )
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _take(f, 2, "name length"))
            name = _take(f, nlen, "name").decode("utf-8")
            code, rank = struct.unpack("<BB", _take(f, 2, "entry header"))
            if code not in _DTYPES:
                raise CheckpointError("unknown dtype code %d in %r" % (code, name))
            shape = tuple(
                struct.unpack("<I", _take(f, 4, "extent"))[0] for _ in range(rank)
            )
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            dt = np.dtype(_DTYPES[code])
            raw = _take(f, n * dt.itemsize, "payload of %r" % name)
            out[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    return out


def _spatial_param(name):
    return name.endswith("basis.weights") or name.endswith(".filt")


def load_checkpoint(path, model):
    """Apply a checkpoint to a built model, by parameter name.

    Spectral filter parameters whose stored extents disagree with the
    model's are bicubically resampled onto the model's half spectrum; any
    other shape mismatch is an error, as is an unknown or missing name.
    """
    stored = read_checkpoint(path)
    params = dict(model.named_parameters())
    for name in stored:
        if name not in params:
            raise CheckpointNameError("checkpoint has unknown entry %r" % name)
    for name, p in params.items():
        if name not in stored:
            raise CheckpointNameError("checkpoint is missing %r" % name)
        src = stored[name]
        want = p.value.shape
        if src.shape == want:
            p.value = np.asarray(src.astype(p.value.dtype, copy=False), order="C")
            p.grad = np.zeros_like(p.value)
            continue
        if (
            _spatial_param(name)
            and src.ndim == 3
            and len(want) == 3
            and src.shape[2] == want[2]
        ):
            out = resample_half_spectrum(src, want[0], want[1])
            p.value = np.asarray(out.astype(p.value.dtype, copy=False), order="C")
            p.grad = np.zeros_like(p.value)
            continue
        raise CheckpointError(
            "entry %r has shape %r, model expects %r" % (name, src.shape, want)
        )
    return model
