import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

npyrandom = os.path.join(os.path.dirname(np.__file__), "random", "lib")

ext = Extension(
    "wealthdual._kernels",
    ["src/wealthdual/_kernels.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[npyrandom],
    libraries=["npyrandom"],
    # fused multiply-add would break bit parity with the Python fallback
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
