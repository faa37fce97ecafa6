import os

import numpy
from setuptools import setup

ext_modules = []
if os.environ.get("FAIRKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "fairkit._core",
                ["src/fairkit/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # keep float results identical to the numpy fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
