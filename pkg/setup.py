from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "twistfp._kernels",
                ["src/twistfp/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: install pure-Python only, the package
    # falls back to twistfp._kernels_py at import.
    ext_modules = []

setup(ext_modules=ext_modules)
