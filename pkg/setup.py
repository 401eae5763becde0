"""Build the optional Cython kernels.

The package works without them: ``dockeval.kernels`` falls back to the
numpy implementation when the extension is not importable.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("DOCKEVAL_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        extensions = [
            Extension(
                "dockeval.kernels._ckernels",
                ["src/dockeval/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
