"""Build script for the optional compiled kernels.

The package works without the extension: kernels.py falls back to the
numpy implementations when freedet._native is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "freedet._native",
                sources=["src/freedet/_native.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
