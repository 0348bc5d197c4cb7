import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("RESOLVENTLAB_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "resolventlab._kernels",
                ["src/resolventlab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: compensated summation relies on strict IEEE ordering
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
