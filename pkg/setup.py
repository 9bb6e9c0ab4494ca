import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-Python install: ratl.backend falls back to the reference kernels.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ratl._cykern",
                ["src/ratl/_cykern.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
