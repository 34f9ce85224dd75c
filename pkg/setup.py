"""Build script for the optional compiled kernels.

The package works without the extension; ``robinbubble._backend`` falls back
to the numpy implementations when ``robinbubble._core`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("ROBINBUBBLE_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "robinbubble._core",
                    ["src/robinbubble/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    libraries=["m"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
