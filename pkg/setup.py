import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "etrsolve._simcore",
                ["src/etrsolve/_simcore.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package still works through the numpy fallback kernel.
    extensions = []

setup(ext_modules=extensions)
