"""Build the optional Cython simplex kernel.

The pure-Python kernel in ``sfpump.lp._kernel_py`` is used whenever the
extension is missing, so a failed compile never breaks installation.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "sfpump.lp._kernel",
                ["src/sfpump/lp/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
