"""Build script for the optional compiled metric kernels.

The package is fully functional without the extension: qasynth.metrics
falls back to pure-Python kernels when the compiled module is missing,
so the extension is marked optional and a failed compile does not abort
the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "qasynth.metrics._kernels",
        ["src/qasynth/metrics/_kernels.pyx"],
        language="c++",
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
