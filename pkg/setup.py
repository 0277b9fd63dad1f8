"""Build script for the optional compiled stencil kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and ``hybridfwi.kernels`` falls back to the
numpy implementation.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HYBRIDFWI_NO_EXT", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hybridfwi._ckernels",
                    ["src/hybridfwi/_ckernels.pyx"],
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
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
