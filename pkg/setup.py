import numpy
from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to the
# numpy implementations in shiftpress._kernels._fallback when the extension
# is unavailable.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "shiftpress._kernels._native",
                ["src/shiftpress/_kernels/_native.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
