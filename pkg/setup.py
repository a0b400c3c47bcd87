import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DICHOTOMY_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:  # build without the compiled core; pure-Python fallback is used
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "dichotomy._kernels",
                    ["src/dichotomy/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
