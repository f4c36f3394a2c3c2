import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DEJITTER_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None

    if cythonize is not None:
        npy_random_lib = os.path.join(os.path.dirname(np.get_include()), "..", "random", "lib")
        extensions = [
            Extension(
                "dejitter._core._kernels",
                ["src/dejitter/_core/_kernels.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[os.path.normpath(npy_random_lib)],
                libraries=["npyrandom", "m"],
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-builtin-sin", "-fno-builtin-cos"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
