"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy backend is selected
at import time), so any failure here is non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mtlab.kernels._accel",
                sources=["src/mtlab/kernels/_accel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"mtlab: skipping Cython extension build ({exc}); "
          "pure-python kernels will be used")

setup(ext_modules=ext_modules)
