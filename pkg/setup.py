"""Build script for the compiled training kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed extension build degrades to the pure-Python
backend instead of breaking the install.
"""

import os
import sys

from setuptools import Extension, setup

ext_modules = []
try:
    if not os.path.exists("src/holocomp/nn/_kernels.pyx"):
        raise ImportError("kernel sources not present")
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "holocomp.nn._kernels",
                ["src/holocomp/nn/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError as exc:
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
