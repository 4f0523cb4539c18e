"""FFT token-mixer vision models with a self-contained numeric stack.

The package provides: an orthonormal 2D real FFT (radix-2 and Bluestein), a
reverse-mode tape that differentiates through the transforms and complex
filter weights, dynamic/static spectral token mixers plus conv and attention
baselines, four-stage model assembly with cost accounting and checkpoints,
training, and the spectrum/filter/CKA analysis toolkit.
"""

from ._backend import BACKEND
from .autograd import Parameter, Tape
from .errors import DfformerError
from .model import build_model, count_flops, count_params, get_config
from .spectral import get_plan, irfft2, rfft2

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DfformerError",
    "Parameter",
    "Tape",
    "build_model",
    "count_flops",
    "count_params",
    "get_config",
    "get_plan",
    "irfft2",
    "rfft2",
    "__version__",
]
