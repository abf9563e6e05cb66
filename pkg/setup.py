import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CPOPT_NO_EXTENSION") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "cpopt.solver._kernels",
            ["src/cpopt/solver/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        # Pure-Python install; the solver falls back to the numpy kernels.
        ext_modules = []

setup(ext_modules=ext_modules)
