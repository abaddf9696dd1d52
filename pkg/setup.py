"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes long episodes much faster.
"""

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cython failure, ...
            print(f"WARNING: skipping compiled kernels ({exc}); "
                  "pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: could not build {ext.name} ({exc}); "
                  "pure-Python fallback will be used")


try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        [Extension(
            "hetpricing._kernels._speedups",
            ["src/hetpricing/_kernels/_speedups.pyx"],
            extra_compile_args=["-O3"],
            include_dirs=[numpy.get_include()],
        )],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
