"""Build script: compiles the optional Cython integration core.

The package works without the extension (a pure-Python fallback is selected
at import time), so a missing compiler downgrades the build instead of
failing it.  Set SPDIFF_PURE_PY=1 to skip the extension on purpose.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken toolchain
            print(f"WARNING: building the compiled core failed ({exc}); "
                  "falling back to the pure-Python kernels", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: {ext.name} not built ({exc}); "
                  "falling back to the pure-Python kernels", file=sys.stderr)


ext_modules = []
cmdclass = {}
if os.environ.get("SPDIFF_PURE_PY") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("WARNING: Cython not available; building without the compiled core",
              file=sys.stderr)
    else:
        # -ffp-contract=off keeps the C arithmetic bit-identical to the
        # pure-Python fallback (no FMA contraction); never use -ffast-math,
        # the kernels rely on IEEE non-finite checks.
        flags = [] if os.name == "nt" else ["-O3", "-ffp-contract=off"]
        ext_modules = cythonize(
            [Extension("spdiff._kernel", ["src/spdiff/_kernel.pyx"],
                       extra_compile_args=flags)],
            compiler_directives={"language_level": "3"},
        )
        cmdclass["build_ext"] = optional_build_ext

setup(ext_modules=ext_modules, cmdclass=cmdclass)
