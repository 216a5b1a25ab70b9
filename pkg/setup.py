"""Build script.

The compiled kernels are optional: if Cython (and a working C toolchain) is
available the extension ``coxmap._kernels._fast`` is built, otherwise the
package falls back to the pure-numpy implementations in
``coxmap._kernels._ref``.  Set COXMAP_NO_EXT=1 to skip the extension build
explicitly.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("COXMAP_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        # contraction off: compiled results must track _ref.py op for op
        flags = ["-O3", "-ffp-contract=off"] if os.name == "posix" else []
        ext_modules = cythonize(
            [
                Extension(
                    "coxmap._kernels._fast",
                    sources=["src/coxmap/_kernels/_fast.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=flags,
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
