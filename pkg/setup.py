"""Build script: compiles the optional accelerator extension.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time), so any failure to cythonize or
compile downgrades to a pure install instead of aborting.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    try:
        return cythonize(
            ["src/lifemoments/_core.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # noqa: BLE001 - degrade to pure python
        print(f"lifemoments: skipping compiled core ({exc})", file=sys.stderr)
        return []


setup(ext_modules=_extensions())
