import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the numpy fallback still works without the extension
    cythonize = None


def _openmp_flags():
    if os.environ.get("STADIUM_LAB_NO_OPENMP") or sys.platform == "darwin":
        return [], []
    return ["-fopenmp"], ["-fopenmp"]


ext_modules = []
if cythonize is not None:
    cflags, lflags = _openmp_flags()
    extensions = [
        Extension(
            "stadium_lab._kernels",
            ["src/stadium_lab/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"] + cflags,
            extra_link_args=lflags,
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
