"""Build script.

The compiled kernel extension is optional: when Cython or a C compiler is
unavailable (or DENSIPRUNE_NO_EXT=1 is set) the package installs with the
pure-numpy backend only and densiprune.backend falls back to it at import.

Build in place for development with:

    python setup.py build_ext --inplace
"""

import os

from setuptools import setup


def kernel_extension():
    if os.environ.get("DENSIPRUNE_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "densiprune.backend._kernels",
        ["src/densiprune/backend/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=kernel_extension())
