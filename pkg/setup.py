"""Build script: compiles the PM-EB kernel when Cython is available.

The package works without the extension (a pure-Python fallback is
selected at import time), so compilation failures are non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "shiftwatch.confidence._kernel",
                ["src/shiftwatch/confidence/_kernel.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
