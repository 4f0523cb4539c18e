"""Build script for the optional compiled kernel core.

The package works without the extension (a pure numpy fallback is selected at
import time), so a missing compiler only costs speed, not functionality.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "dfformer._kernels",
                sources=["src/dfformer/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # No -ffast-math and no FMA contraction: the FFT butterflies
                # must stay IEEE so both backends produce bit-identical results.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
