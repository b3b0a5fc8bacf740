"""Build script: compiles the optional Cython scattering kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure here is non-fatal: we fall back to a
pure-Python build rather than aborting the install.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "chiralpb.kernels._chain",
                ["src/chiralpb/kernels/_chain.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(
        "chiralpb: Cython extension unavailable (%s); "
        "installing with the numpy reference kernel only.\n" % exc
    )
    ext_modules = []

setup(ext_modules=ext_modules)
