"""Build the optional compiled RK4 kernel.

The package works without it; ``uscqed.kernel`` falls back to numpy when the
extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("USCQED_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "uscqed._rk4",
                    ["src/uscqed/_rk4.pyx"],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                    optional=True,
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
                "embedsignature": True,
            },
        )

setup(ext_modules=ext_modules)
