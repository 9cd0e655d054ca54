"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            warnings.warn(f"skipping compiled kernels, using NumPy fallback: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name}, using NumPy fallback: {exc}")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        "src/fingertrain/kernels/_fast.pyx",
        language_level=3,
        include_path=[np.get_include()],
    )


try:
    import numpy as np

    include_dirs = [np.get_include()]
except ImportError:
    include_dirs = []

setup(
    ext_modules=extensions(),
    include_dirs=include_dirs,
    cmdclass={"build_ext": OptionalBuildExt},
)
