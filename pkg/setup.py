"""Build the optional Cython core; the package falls back to pure Python without it."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("EDGETPU_EVAL_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "edgetpu_eval.nas_graph._core",
                    ["src/edgetpu_eval/nas_graph/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
