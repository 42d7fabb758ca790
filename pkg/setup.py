"""Build the optional Cython kernels.

A missing compiler or Cython installation is not fatal: the package ships
pure-Python implementations of every kernel and picks them at import time.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("QLINK_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = [
            Extension("qlink.vppu._interp_core", ["src/qlink/vppu/_interp_core.pyx"]),
            Extension("qlink.qec._backlog_core", ["src/qlink/qec/_backlog_core.pyx"]),
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
