"""Build script for the compiled simulation core.

The extension is optional: if it fails to build (no compiler, no OpenMP),
the package installs anyway and falls back to the pure-numpy backend at
import time.
"""
import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

npyrandom_dir = os.path.join(os.path.dirname(np.random.__file__), "lib")

ext = Extension(
    "smallmass._kernels",
    ["src/smallmass/_kernels.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[npyrandom_dir],
    libraries=["npyrandom"],
    extra_compile_args=["-O3", "-fopenmp"],
    extra_link_args=["-fopenmp"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level=3))
