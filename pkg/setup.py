"""Build script: compiles the optional Cython kernel extension.

The extension is a performance fast path only; if the build fails (no
compiler, no Cython), installation proceeds and the package falls back to
the NumPy implementations at import time.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that downgrades compilation failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - environment dependent
            print(f"WARNING: native kernel build skipped ({exc}); "
                  "using NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - environment dependent
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "using NumPy fallback")


ext_modules = []
if not os.environ.get("REASONBO_SKIP_NATIVE"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "reasonbo._kernels._native",
                    sources=["src/reasonbo/_kernels/_native.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:  # pragma: no cover - environment dependent
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
