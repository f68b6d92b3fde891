"""Build script for the optional compiled training kernel.

The package is fully functional without it (a pure-Python kernel is
selected at import time); building the extension just makes training much
faster:

    python setup.py build_ext --inplace
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "hplsv._core",
                ["src/hplsv/_core.pyx"],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
