import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SCHEDLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "schedlab._kernels._fast",
                    ["src/schedlab/_kernels/_fast.pyx"],
                    # no FMA contraction: results must match the Python twin bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
