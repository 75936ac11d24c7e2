"""Build script for the compiled kernels.

The package works without the extension: ``xpmchannel.kernels`` falls back to
the numpy implementations when ``xpmchannel._kernels`` cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("XPMCHANNEL_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "xpmchannel._kernels",
                ["src/xpmchannel/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
