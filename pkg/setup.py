"""Build script: compiles the optional decode-kernel extension.

The package works without the extension (a pure-Python kernel is selected at
import time); any compiler failure downgrades to a pure build instead of
aborting the install.
"""

import sys

from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/stlclab/_speedups.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    sys.stderr.write("Cython not available; building pure-Python stlclab\n")


class OptionalBuildError(Exception):
    pass


def run_setup(with_ext):
    setup(ext_modules=ext_modules if with_ext else [])


try:
    run_setup(with_ext=True)
except (CCompilerError, ExecError, PlatformError, OptionalBuildError):
    sys.stderr.write("extension build failed; falling back to pure-Python stlclab\n")
    run_setup(with_ext=False)
