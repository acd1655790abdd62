import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, the fallback kernels take over
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("PHASELAB_NO_EXT"):
    npy_random_lib = os.path.join(np.get_include(), "..", "..", "random", "lib")
    ext_modules = cythonize(
        [
            Extension(
                "phaselab._kernels",
                ["src/phaselab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[npy_random_lib],
                libraries=["npyrandom", "m"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
