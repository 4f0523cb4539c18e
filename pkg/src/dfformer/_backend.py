"""Kernel backend selection.

The compiled extension is preferred when importable; a pure numpy fallback is
always available. Override with DFFORMER_KERNELS={auto,compiled,python}.
Selection happens once at import time.
"""

import os

from . import _kernels_py

_choice = os.environ.get("DFFORMER_KERNELS", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(
        "DFFORMER_KERNELS must be one of auto/compiled/python, got %r" % _choice
    )

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _kernels as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = None
if _impl is None:
    _impl = _kernels_py

BACKEND = _impl.NAME
fft_pow2_inplace = _impl.fft_pow2_inplace
dwconv_fwd = _impl.dwconv_fwd
dwconv_gradk = _impl.dwconv_gradk


def get_backend(name):
    """Return a specific backend module by name, for benchmarks and tests."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError("unknown backend %r" % name)
