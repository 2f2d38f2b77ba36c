"""Build script for the optional compiled kernels.

The package works without the extension (a pure-NumPy fallback is selected
at import time); the extension just makes batch tree inference and ring
simulation much faster.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "crisptree.kernels._fastcore",
                sources=["src/crisptree/kernels/_fastcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
